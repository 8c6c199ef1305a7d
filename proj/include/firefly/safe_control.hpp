#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "firefly/dynamics.hpp"
#include "firefly/mission.hpp"
#include "firefly/solver.hpp"

namespace firefly {

enum class SafetyMode { Central, Distributed };

std::string_view to_string(SafetyMode mode);
SafetyMode safety_mode_from_string(std::string_view name);

struct SafetyConfig {
  double alpha = 0.15;    // per-step CBF decay: h[t+1] >= (1 - alpha) h[t]
  double lambda = 0.025;  // CLF rate: V[t+1] <= (1 - lambda dt) V[t] + delta
  SafetyMode mode = SafetyMode::Central;
  int dist_rounds = 50;
  double dist_tol = 1e-4;
  double responsibility = 0.5;  // share of a pair shortfall carried by the lower index
  double steer = 1.0;           // tangential reference push on violated rows, 0 disables
  bool per_barrier = false;     // try per-barrier rows before composite ones
  int threads = 1;
  SolverSettings solver{};

  void validate() const;
};

/// alpha = 0.15, lambda = 0.025.
SafetyConfig central_safety_config();
/// alpha = 0.1, lambda = 0.1.
SafetyConfig distributed_safety_config();

inline constexpr double kNoBarrier = std::numeric_limits<double>::infinity();

struct BarrierReport {
  double h_obstacle = kNoBarrier;    // min_{k,o} ||p_k - c_o||^2 - r_o^2
  double h_separation = kNoBarrier;  // min_{k<j} ||p_j - p_k||^2 - d_s^2
  double h = kNoBarrier;             // min of the two
  double V = -kNoBarrier;            // max_k ||p_k - c_Gk||^2 - r_Gk^2
  int obstacle_robot = -1;
  int obstacle_index = -1;
  int pair_first = -1;
  int pair_second = -1;
  int clf_robot = -1;
};

BarrierReport barriers(const MissionSpec& spec, std::span<const RobotState> states);

/// One discrete CBF row: coef_first . u_first + coef_second . u_second >= rhs.
/// Obstacle rows have second = -1 and a zero second coefficient.
///
/// h is convex in positions, so linearising h at the zero-input successor
/// position gives a lower bound on h at the true successor; a row that holds
/// therefore certifies its decay condition exactly.
struct CbfRow {
  int first = -1;
  int second = -1;
  int obstacle = -1;
  Vec3 coef_first = Vec3::Zero();
  Vec3 coef_second = Vec3::Zero();
  double rhs = 0.0;

  double margin(std::span<const RobotInput> u) const;  // >= 0 when satisfied
};

/// PerBarrier holds each barrier to its own decay, h_i[t+1] >= (1 - alpha) h_i[t].
/// Composite holds every barrier to (1 - alpha) min_i h_i[t], which is exactly
/// the decay condition on h = min_i h_i and is always the weaker of the two.
enum class CbfFloor { PerBarrier, Composite };

std::vector<CbfRow> cbf_rows(const MissionSpec& spec, std::span<const RobotState> states,
                             double alpha, CbfFloor floor = CbfFloor::PerBarrier);

/// Fair inputs with a sideways push for every robot on a row the fair inputs
/// violate. The push is tangent to the barrier's level set, leans toward the
/// robot's goal, and has `gain` times the size of the normal correction the
/// row needs (split evenly on pair rows). A straight-on approach otherwise
/// stalls at the barrier with no lateral component to slide around it.
/// Inputs on satisfied rows are returned unchanged.
std::vector<RobotInput> steered_reference(const MissionSpec& spec,
                                          std::span<const RobotState> states,
                                          std::span<const RobotInput> u_fair,
                                          std::span<const CbfRow> rows, double gain);

struct SafeStep {
  std::vector<RobotInput> inputs;
  std::vector<double> deltas;  // one shared slack (central) or one per robot
  std::vector<RobotInput> reference;  // steered fair inputs the filter tracked
  BarrierReport report;
  int rounds = 0;              // best-response rounds (distributed)
  bool warning = false;        // distributed filter ran zero rounds
  bool relaxed = false;        // per-barrier rows were infeasible; composite rows used

  double max_delta() const;
};

/// The filter program has no solution; carries the diagnostic report.
class SafetyInfeasible : public std::runtime_error {
 public:
  SafetyInfeasible(const std::string& what, BarrierReport report, int robot = -1)
      : std::runtime_error(what), report_(report), robot_(robot) {}
  const BarrierReport& report() const { return report_; }
  int robot() const { return robot_; }

 private:
  BarrierReport report_;
  int robot_;
};

/// min ||u - u_fair||^2 + delta^2 over the whole team subject to every
/// CBF row, one CLF row per robot sharing delta, and the input box.
/// With per_barrier set, both filters try per-barrier rows first and fall back
/// to composite rows.
SafeStep central_safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                           std::span<const RobotInput> u_fair, const SafetyConfig& cfg);

/// Synchronised best-response rounds. Robot k minimises
/// (1 + 1/N) ||u_k - u_fair_k||^2 + delta_k^2 under its obstacle rows, its own
/// CLF row and its budgets on the pair rows. Pair budgets always sum to the
/// joint requirement, so the team satisfies every pair row whenever each
/// robot satisfies its own budgets. After each round any surplus a robot
/// produced on a pair is handed to its partner.
SafeStep distributed_safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                               std::span<const RobotInput> u_fair, const SafetyConfig& cfg);

SafeStep safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                   std::span<const RobotInput> u_fair, const SafetyConfig& cfg);

}  // namespace firefly
