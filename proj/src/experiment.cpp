#include "firefly/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace firefly {

void SweepOptions::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (groups.empty()) throw std::invalid_argument("no obstacle counts or team sizes given");
  if (notions.empty()) throw std::invalid_argument("no fairness notions given");
  if (modes.empty()) throw std::invalid_argument("no safe modes given");
  if (replan_every < 1) throw std::invalid_argument("replan-every must be at least 1");
  if (!(eta_scale > 0.0)) throw std::invalid_argument("eta scale must be positive");
  if (eta && !(*eta > 0.0)) throw std::invalid_argument("eta must be positive");
}

SweepOptions experiment1_defaults() {
  SweepOptions o;
  o.groups = {1, 2, 3, 4, 5};
  o.modes = {SafetyMode::Central, SafetyMode::Distributed};
  return o;
}

SweepOptions experiment2_defaults() {
  SweepOptions o;
  o.groups = {7, 10, 12, 15};
  o.modes = {SafetyMode::Distributed};
  return o;
}

int worker_count(int requested, int tasks) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("FIREFLY_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(1, tasks));
}

std::uint64_t trial_seed(std::uint64_t base, int group, int trial) {
  // splitmix64 finalizer over a packed key
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (1 + (static_cast<std::uint64_t>(group) << 20) +
                                                    static_cast<std::uint64_t>(trial));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct Task {
  int group = 0;
  int trial = 0;
  std::string id;
};

struct TaskOutput {
  std::vector<TrialResult> trials;
  std::vector<RunRecord> timings;  // timing-only copies for the runtime table
};

void write_file(const std::filesystem::path& path, const auto& writer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  if (!out) throw IoError("write failed: " + path.string());
}

double mean_of(const RunRecord& r, double StepTiming::*field) {
  if (r.timing.empty()) return 0.0;
  double s = 0.0;
  for (const StepTiming& t : r.timing) s += t.*field;
  return s / static_cast<double>(r.timing.size());
}

TrialResult describe(const RunRecord& r, const Task& task, std::string notion, SafetyMode mode) {
  TrialResult t;
  t.scenario = task.id;
  t.group = task.group;
  t.notion = std::move(notion);
  t.mode = std::string(to_string(mode));
  t.robots = r.robots;
  t.reached = r.reached_count();
  t.reached_at = r.reached_at;
  t.safety_failures = r.safety_failures;
  t.replans = r.replans;
  for (const PlanStats& st : r.plan_stats) {
    t.planner_iterations_max = std::max(t.planner_iterations_max, st.iterations);
    t.planner_converged = t.planner_converged && st.converged;
    t.planned_f_increase = std::max(t.planned_f_increase, st.f_final - st.f_initial);
  }
  t.min_h = r.min_h();
  t.plan_seconds_mean = mean_of(r, &StepTiming::plan_seconds);
  t.safe_seconds_mean = mean_of(r, &StepTiming::safe_seconds);
  return t;
}

RunRecord timing_only(const RunRecord& r) {
  RunRecord t;
  t.robots = r.robots;
  t.timing = r.timing;
  return t;
}

TaskOutput run_task(const Task& task, const MissionSpec& spec, const SweepOptions& o) {
  namespace fs = std::filesystem;
  TaskOutput out;
  const bool files = !o.out_dir.empty();
  if (files) save(spec, o.out_dir / "scenarios" / (task.id + ".scn"));

  RunConfig base_cfg = default_run_config(FairnessKind::F1, SafetyMode::Central);
  base_cfg.seed = o.seed;
  const RunRecord base = run_baseline(spec, base_cfg);
  if (files) {
    write_file(o.out_dir / "runs" / (task.id + "_none_central.csv"),
               [&](std::ostream& os) { write_run_csv(base, os); });
  }
  TrialResult bt = describe(base, task, "none", SafetyMode::Central);
  const bool have_solo = base.solo_energies.size() == static_cast<std::size_t>(spec.robot_count());
  const SoloBaseline solo{base.solo_energies};
  if (have_solo) bt.e_baseline = bt.e_firefly = normalized_energy(base.executed_plan(), solo);
  out.trials.push_back(bt);

  for (FairnessKind kind : o.notions) {
    for (SafetyMode mode : o.modes) {
      RunConfig cfg = default_run_config(kind, mode);
      cfg.replan_every = o.replan_every;
      cfg.seed = o.seed;
      cfg.planner.convergence_tol = o.eta ? *o.eta : cfg.planner.convergence_tol / o.eta_scale;
      const RunRecord rec = run(spec, cfg);
      const std::string name = task.id + "_" + std::string(to_string(kind)) + "_" +
                               std::string(to_string(mode));
      if (files) {
        write_file(o.out_dir / "runs" / (name + ".csv"),
                   [&](std::ostream& os) { write_run_csv(rec, os); });
        write_file(o.out_dir / "runs" / (name + ".txt"),
                   [&](std::ostream& os) { write_run_summary(rec, spec, cfg, os); });
      }
      TrialResult t = describe(rec, task, std::string(to_string(kind)), mode);
      if (have_solo) {
        t.f_firefly = evaluate(cfg.notion, rec.executed_plan(), solo);
        t.f_baseline = evaluate(cfg.notion, base.executed_plan(), solo);
        t.improved = fairness_improvement(rec, base, cfg.notion, solo);
        t.e_firefly = normalized_energy(rec.executed_plan(), solo);
        t.e_baseline = bt.e_baseline;
      } else {
        t.f_firefly = t.f_baseline = std::numeric_limits<double>::quiet_NaN();
      }
      out.trials.push_back(std::move(t));
      out.timings.push_back(timing_only(rec));
    }
  }
  return out;
}

ExperimentSummary sweep(const SweepOptions& o, bool team_sweep) {
  o.validate();
  namespace fs = std::filesystem;
  if (!o.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(o.out_dir / "scenarios", ec);
    if (!ec) fs::create_directories(o.out_dir / "runs", ec);
    if (ec) throw IoError("cannot create " + o.out_dir.string() + ": " + ec.message());
  }

  std::vector<Task> tasks;
  for (int g : o.groups) {
    for (int i = 0; i < o.trials; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s%d_t%03d", team_sweep ? "n" : "o", g, i);
      tasks.push_back(Task{g, i, id});
    }
  }

  std::vector<TaskOutput> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        ScenarioSeed seed;
        seed.rng_seed = trial_seed(o.seed, tasks[i].group, tasks[i].trial);
        seed.kind = team_sweep ? ExperimentKind::TeamSweep : ExperimentKind::ObstacleSweep;
        if (team_sweep) {
          seed.n_robots = tasks[i].group;
          seed.n_obstacles = 1;
        } else {
          seed.n_obstacles = tasks[i].group;
        }
        results[i] = run_task(tasks[i], generate(seed, o.generator), o);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const int workers = worker_count(o.threads, static_cast<int>(tasks.size()));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentSummary s;
  s.experiment = team_sweep ? "exp2" : "exp1";
  s.group_name = team_sweep ? "robots" : "obstacles";
  s.replan_every = o.replan_every;
  s.tracking_only = o.replan_every > o.generator.horizon;
  s.eta_scale = o.eta_scale;
  std::vector<RunRecord> timings;
  for (TaskOutput& r : results) {
    for (TrialResult& t : r.trials) s.trials.push_back(std::move(t));
    for (RunRecord& t : r.timings) timings.push_back(std::move(t));
  }
  s.arms = summarize_arms(s.trials);
  s.runtime = runtime_table(timings);

  if (!o.out_dir.empty()) {
    write_file(o.out_dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(s, os); });
    write_file(o.out_dir / "trials.csv", [&](std::ostream& os) { write_trials_csv(s, os); });
    write_file(o.out_dir / "summary.txt", [&](std::ostream& os) { write_summary_text(s, os); });
  }
  return s;
}

}  // namespace

ExperimentSummary run_experiment1(const SweepOptions& options) { return sweep(options, false); }

ExperimentSummary run_experiment2(const SweepOptions& options) { return sweep(options, true); }

}  // namespace firefly
