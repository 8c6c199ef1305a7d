#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "firefly/dynamics.hpp"

namespace firefly {

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;

  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p - center).norm() <= radius + tol;
  }
  bool operator==(const Sphere&) const = default;
};

/// Thrown for invalid mission data, scenario parse errors and failed
/// scenario generation.
class MissionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reach-avoid mission for a team of point-mass robots.
struct MissionSpec {
  std::vector<Vec3> starts;
  std::vector<Sphere> goals;
  std::vector<Sphere> obstacles;
  std::vector<int> horizons;
  double separation = 0.01;  // d_s
  double u_min = -100.0;
  double u_max = 100.0;
  double dt = 0.2;

  int robot_count() const { return static_cast<int>(starts.size()); }
  int max_horizon() const;
  bool operator==(const MissionSpec&) const = default;
};

/// Throws MissionError naming the first violated invariant.
/// `min_robots` is 2 for team missions; the solo baseline validates with 1.
void validate(const MissionSpec& spec, int min_robots = 2);

enum class ExperimentKind { ObstacleSweep, TeamSweep };

struct ScenarioSeed {
  std::uint64_t rng_seed = 0;
  int n_robots = 5;
  int n_obstacles = 1;
  ExperimentKind kind = ExperimentKind::ObstacleSweep;
};

/// Geometry used by the scenario generators. None of these values are
/// part of the mission contract; they only shape the random corpora.
struct GeneratorConfig {
  double workspace_min = 0.0;
  double workspace_max = 10.0;
  double goal_radius = 0.5;          // team sweep, per-robot goals
  // Obstacle sweep. The shared goal must be wide relative to the start
  // circle: pairwise separation rows cap how fast robots may converge.
  double shared_goal_radius = 3.0;
  double start_circle_radius = 5.0;
  double obstacle_radius_min = 0.3;
  double obstacle_radius_max = 0.7;
  double shell_radius = 4.0;         // team sweep
  double central_obstacle_radius = 1.0;
  double start_clearance = 0.3;      // obstacle surface to any start
  double goal_clearance = 0.3;       // obstacle surface to goal surface
  double min_start_spacing = 0.5;    // team sweep, pairwise
  int horizon = 25;
  double separation = 0.01;
  double u_max = 100.0;
  double dt = 0.2;
  int max_draws = 1000;
};

/// Fixed starts on a circle around a single shared goal; obstacles on the
/// straight segment from a randomly chosen start to the goal center.
MissionSpec generate_experiment1(const ScenarioSeed& seed, const GeneratorConfig& cfg = {});

/// One central obstacle; starts and goals drawn on a shell around it.
MissionSpec generate_experiment2(const ScenarioSeed& seed, const GeneratorConfig& cfg = {});

MissionSpec generate(const ScenarioSeed& seed, const GeneratorConfig& cfg = {});

inline constexpr const char* kScenarioVersion = "firefly-scenario-v1";

std::string to_scenario_text(const MissionSpec& spec);
MissionSpec from_scenario_text(const std::string& text);

void save(const MissionSpec& spec, const std::filesystem::path& path);
MissionSpec load(const std::filesystem::path& path);

/// mt19937_64 with hand-rolled mappings: the engine sequence is fixed by the
/// standard, the std distributions are not, so corpora stay portable.
class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);  // inclusive
  Vec3 unit_vector();

 private:
  std::mt19937_64 engine_;
};

}  // namespace firefly
