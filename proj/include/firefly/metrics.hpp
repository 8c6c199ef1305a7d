#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "firefly/firefly_loop.hpp"

namespace firefly {

/// A metric is undefined for its input (empty set, mismatched records).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Robots that reached their goal within their own horizon over all robots.
double mission_success(std::span<const RunRecord> records);

/// True iff f(executed firefly inputs) < f(executed baseline inputs) under
/// the shared solo energies. Throws MetricError when the two records do not
/// describe the same mission.
bool fairness_improvement(const RunRecord& firefly, const RunRecord& baseline,
                          const FairnessNotion& notion, const SoloBaseline& solo);

struct PhaseStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
  int samples = 0;
};

PhaseStats phase_stats(std::span<const double> samples);

struct RuntimeRow {
  int team_size = 0;
  int runs = 0;
  PhaseStats plan;  // per-step fair-planner seconds
  PhaseStats safe;  // per-step safe-control seconds
};

/// Per-step timing grouped by team size, rows ascending by size.
std::vector<RuntimeRow> runtime_table(std::span<const RunRecord> records);

/// One firefly run next to the baseline run of the same scenario.
struct TrialResult {
  std::string scenario;
  int group = 0;  // obstacle count (obstacle sweep) or team size (team sweep)
  std::string notion;  // "none" for the baseline arm
  std::string mode;
  int robots = 0;
  int reached = 0;
  std::vector<int> reached_at;
  int safety_failures = 0;
  int replans = 0;
  int planner_iterations_max = 0;
  bool planner_converged = true;
  double planned_f_increase = 0.0;  // max over re-plans of f_final - f_initial
  double min_h = 0.0;
  double f_firefly = 0.0;
  double f_baseline = 0.0;
  bool improved = false;
  Eigen::VectorXd e_firefly;
  Eigen::VectorXd e_baseline;
  double plan_seconds_mean = 0.0;
  double safe_seconds_mean = 0.0;
};

/// Aggregate of one (group, notion, mode) cell of a sweep.
struct ArmSummary {
  int group = 0;
  std::string notion;
  std::string mode;
  int trials = 0;
  int robots = 0;
  int reached = 0;
  int improved = 0;
  double success_rate = 0.0;
  double improvement_rate = 0.0;  // 0 for the baseline arm
  PhaseStats plan;
  PhaseStats safe;
};

struct ExperimentSummary {
  std::string experiment;  // "exp1" or "exp2"
  std::string group_name;  // "obstacles" or "robots"
  int replan_every = 1;
  bool tracking_only = false;  // replan_every exceeds the horizon: one plan, then tracking
  double eta_scale = 1.0;      // eta divided by this
  std::vector<TrialResult> trials;
  std::vector<ArmSummary> arms;  // sorted by notion, mode, group
  std::vector<RuntimeRow> runtime;

  /// Pooled over every group of one notion and mode.
  ArmSummary pooled(const std::string& notion, const std::string& mode) const;
  const ArmSummary* find(int group, const std::string& notion, const std::string& mode) const;
};

/// Builds the per-arm aggregates from trial results and run timings.
std::vector<ArmSummary> summarize_arms(std::span<const TrialResult> trials);

/// One row per arm. Timing columns are last.
void write_summary_csv(const ExperimentSummary& s, std::ostream& out);
/// One row per trial with the energy vectors joined by ';'.
void write_trials_csv(const ExperimentSummary& s, std::ostream& out);
/// Human-readable tables: rates per arm and the runtime split per team size.
void write_summary_text(const ExperimentSummary& s, std::ostream& out);

}  // namespace firefly
