#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "firefly/fairness.hpp"
#include "firefly/mission.hpp"
#include "firefly/solver.hpp"

namespace firefly {

/// A robot's goal cannot be reached within its horizon under the input box.
class MissionInfeasible : public std::runtime_error {
 public:
  MissionInfeasible(int robot, const std::string& what)
      : std::runtime_error(what), robot_(robot) {}
  int robot() const { return robot_; }

 private:
  int robot_;
};

/// A local descent program failed inside the fair planner.
class PlanningError : public std::runtime_error {
 public:
  PlanningError(int robot, int iteration, const std::string& what)
      : std::runtime_error(what), robot_(robot), iteration_(iteration) {}
  int robot() const { return robot_; }
  int iteration() const { return iteration_; }

 private:
  int robot_;
  int iteration_;
};

struct PlannerConfig {
  int max_iters = 1000;           // R
  double convergence_tol = 0.5;   // eta
  double gamma_start = 1.0;
  double gamma_end = 0.1;
  double eps_min = -10.0;
  double eps_max = 10.0;
  double kappa = 1.0;
  int threads = 1;                // local solves per iteration in parallel
  SolverSettings solver{};

  /// Step size of iteration r (1-based): linear from gamma_start to
  /// gamma_end over max_iters iterations, then constant.
  double gamma(int r) const;
  void validate() const;
};

/// Defaults with eta chosen per notion: 0.5 for f1/f2 and 0.1 for f3/f4.
PlannerConfig default_planner_config(FairnessKind kind);

/// Terminal position of robot k (starting at rest) under its flat input
/// sequence `u`.
Vec3 terminal_position(const MissionSpec& spec, int k, const Eigen::VectorXd& u);

/// Minimum-energy inputs of robot k alone: min sum ||u[t]||^2 subject to the
/// input box and p[H_k] in G_k. Obstacles and other robots are ignored.
Eigen::VectorXd min_energy_inputs(const MissionSpec& spec, int k,
                                  const SolverSettings& settings = {});

TeamPlan initial_plan(const MissionSpec& spec, const SolverSettings& settings = {});

/// Throws FairnessError when a robot already starts inside its goal
/// (its solo energy is zero and cannot normalize).
SoloBaseline solo_baseline(const MissionSpec& spec, const SolverSettings& settings = {});

/// Descent program of robot k over the unexecuted steps of `plan`:
///   min  eps^T g + kappa ||eps||^2
///   s.t. u + eps in the input box, eps_min <= eps <= eps_max,
///        terminal position of u + eps in G_k.
/// `gradient` is the full-length gradient with respect to robot k's inputs.
ConvexProgram local_problem(int k, const TeamPlan& plan, const Eigen::VectorXd& gradient,
                            const PlannerConfig& cfg, const MissionSpec& spec);

/// Makes every robot's unexecuted suffix feasible for the box and goal
/// constraints with the smallest change. Robots already feasible are left
/// untouched, as are robots flagged in `frozen`. Throws MissionInfeasible when
/// a goal is out of reach.
TeamPlan repair_plan(const MissionSpec& spec, const TeamPlan& plan,
                     const SolverSettings& settings = {}, std::span<const char> frozen = {});

/// True when robot k's plan satisfies the box and goal constraints.
bool plan_feasible(const MissionSpec& spec, const TeamPlan& plan, int k, double tol = 1e-6);

struct PlanStats {
  int iterations = 0;
  bool converged = false;     // stopping rule met before max_iters
  double f_initial = 0.0;
  double f_final = 0.0;
  int backtracks = 0;         // step-size halvings across all iterations
};

/// Distributed fair planning. Each iteration solves the N local problems on
/// a frozen snapshot and applies u += gamma * eps, with gamma halved until
/// the team objective does not increase. Stops once a step is at most eta.
/// Robots with no unexecuted steps, or flagged in `frozen`, keep their inputs
/// but still count in the objective. An optional CSV trace receives one line
/// per iteration.
TeamPlan plan_fair(const MissionSpec& spec, const FairnessNotion& notion,
                   const SoloBaseline& baseline, const TeamPlan& initial,
                   const PlannerConfig& cfg, PlanStats* stats = nullptr,
                   std::ostream* trace = nullptr, std::span<const char> frozen = {});

}  // namespace firefly
