#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "firefly/fair_planner.hpp"
#include "firefly/fairness.hpp"
#include "firefly/mission.hpp"
#include "firefly/safe_control.hpp"

namespace firefly {

/// What a robot does between entering its goal and the end of the run.
/// Continue tracks the rest of its fair plan; Hold brakes to rest and stays
/// out of further planning.
enum class PostGoal { Continue, Hold };
std::string_view to_string(PostGoal policy);
PostGoal post_goal_from_string(std::string_view name);

struct RunConfig {
  FairnessNotion notion{};
  PlannerConfig planner{};
  SafetyConfig safety{};
  int replan_every = 1;
  bool record_traces = false;  // keep the planner's per-iteration CSV trace
  std::uint64_t seed = 0;      // recorded only; the loop itself draws no randomness
  // Planning targets goals shrunk by this much so that executed positions
  // land strictly inside despite solver tolerances.
  double goal_margin = 1e-3;
  PostGoal post_goal = PostGoal::Continue;

  void validate() const;
};

/// Notion-specific planner defaults with the given safety mode.
RunConfig default_run_config(FairnessKind kind, SafetyMode mode);

enum class RobotStatus { Reached, NotReached, FailedSafe };
std::string_view to_string(RobotStatus status);

struct StepTiming {
  double plan_seconds = 0.0;
  double safe_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunRecord {
  bool baseline = false;
  int robots = 0;
  std::vector<int> horizons;
  std::vector<double> solo_energies;  // empty when some robot starts in its goal
  // states[t][k] for t = 0..steps; inputs[t][k] and fair_inputs[t][k] for t < steps.
  std::vector<std::vector<RobotState>> states;
  std::vector<std::vector<RobotInput>> inputs;
  std::vector<std::vector<RobotInput>> fair_inputs;
  std::vector<BarrierReport> reports;  // one per state
  std::vector<double> deltas;          // largest CLF slack per step
  std::vector<int> replanned;          // 1 when the fair plan was recomputed
  std::vector<StepTiming> timing;
  std::vector<std::uint64_t> prefix_hashes;  // plan prefix after each step's planning

  std::vector<RobotStatus> status;
  std::vector<int> reached_at;  // first step inside the goal, -1 if never

  int replans = 0;
  int safety_failures = 0;    // steps that fell back to braking
  int planning_failures = 0;  // re-plans skipped after a planner error
  std::vector<PlanStats> plan_stats;
  std::vector<std::string> events;
  std::string planner_trace;

  int steps() const { return static_cast<int>(inputs.size()); }
  /// Executed inputs as a plan over each robot's horizon; steps never
  /// executed count as zero input.
  TeamPlan executed_plan() const;
  double min_h() const;
  int reached_count() const;
};

/// Hash of the first `len` steps of every robot's input sequence.
std::uint64_t prefix_hash(const TeamPlan& plan, int len);
std::uint64_t prefix_hash(const std::vector<std::vector<RobotInput>>& inputs, int robots, int len);

/// Receding-horizon fair planning with a safety filter on every step.
RunRecord run(const MissionSpec& spec, const RunConfig& cfg);

/// Tracks the initial minimum-energy plan through the same safety filter.
RunRecord run_baseline(const MissionSpec& spec, const RunConfig& cfg);

/// Per-step CSV: t, robot, position, velocity, acceleration, h, V, delta, replanned.
void write_run_csv(const RunRecord& rec, std::ostream& out);

/// Key-value summary: statuses, normalized energies and fairness values.
void write_run_summary(const RunRecord& rec, const MissionSpec& spec, const RunConfig& cfg,
                       std::ostream& out);

}  // namespace firefly
