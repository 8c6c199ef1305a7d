#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "firefly/metrics.hpp"

namespace firefly {

struct SweepOptions {
  int trials = 20;
  std::uint64_t seed = 0;
  std::vector<int> groups;  // obstacle counts (exp1) or team sizes (exp2)
  std::vector<FairnessKind> notions{FairnessKind::F1, FairnessKind::F2, FairnessKind::F3,
                                    FairnessKind::F4};
  std::vector<SafetyMode> modes;
  int replan_every = 1;
  double eta_scale = 1.0;       // planner eta = notion default / eta_scale
  std::optional<double> eta;    // absolute eta, overrides the scale
  int threads = 0;              // 0: FIREFLY_THREADS, else hardware concurrency
  GeneratorConfig generator{};
  std::filesystem::path out_dir;  // empty keeps everything in memory

  void validate() const;
};

/// Obstacle counts 1..5, both safe modes.
SweepOptions experiment1_defaults();
/// Team sizes 7, 10, 12, 15, distributed safe mode.
SweepOptions experiment2_defaults();

/// Worker count: `requested` if positive, else FIREFLY_THREADS, else the
/// hardware concurrency; never more than `tasks`.
int worker_count(int requested, int tasks);

/// Scenario seed of one trial, a pure function of its inputs.
std::uint64_t trial_seed(std::uint64_t base, int group, int trial);

/// Every (group, trial) scenario runs the baseline plus each notion in each
/// mode. With an output directory the layout is <out>/scenarios/,
/// <out>/runs/, <out>/summary.csv, <out>/trials.csv and <out>/summary.txt.
ExperimentSummary run_experiment1(const SweepOptions& options);
ExperimentSummary run_experiment2(const SweepOptions& options);

}  // namespace firefly
