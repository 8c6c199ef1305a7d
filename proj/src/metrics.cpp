#include "firefly/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace firefly {

double mission_success(std::span<const RunRecord> records) {
  if (records.empty()) throw MetricError("mission success of an empty record set is undefined");
  long reached = 0, total = 0;
  for (const RunRecord& r : records) {
    for (int k = 0; k < r.robots; ++k) {
      const int t = r.reached_at[k];
      if (t >= 0 && t <= r.horizons[k]) ++reached;
    }
    total += r.robots;
  }
  if (total == 0) throw MetricError("mission success over zero robots is undefined");
  return static_cast<double>(reached) / static_cast<double>(total);
}

bool fairness_improvement(const RunRecord& firefly, const RunRecord& baseline,
                          const FairnessNotion& notion, const SoloBaseline& solo) {
  if (firefly.robots != baseline.robots || firefly.horizons != baseline.horizons ||
      firefly.states.empty() || baseline.states.empty() ||
      firefly.states.front() != baseline.states.front()) {
    throw MetricError("fairness comparison needs two runs of the same mission");
  }
  const double f_ff = evaluate(notion, firefly.executed_plan(), solo);
  const double f_base = evaluate(notion, baseline.executed_plan(), solo);
  return f_ff < f_base;
}

PhaseStats phase_stats(std::span<const double> samples) {
  PhaseStats s;
  s.samples = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double x : samples) {
    sum += x;
    s.max = std::max(s.max, x);
  }
  s.mean = sum / static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(samples.size()));
  return s;
}

std::vector<RuntimeRow> runtime_table(std::span<const RunRecord> records) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_size;
  std::map<int, int> runs;
  for (const RunRecord& r : records) {
    auto& [plan, safe] = by_size[r.robots];
    for (const StepTiming& t : r.timing) {
      plan.push_back(t.plan_seconds);
      safe.push_back(t.safe_seconds);
    }
    ++runs[r.robots];
  }
  std::vector<RuntimeRow> rows;
  for (const auto& [size, samples] : by_size) {
    RuntimeRow row;
    row.team_size = size;
    row.runs = runs[size];
    row.plan = phase_stats(samples.first);
    row.safe = phase_stats(samples.second);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ArmSummary> summarize_arms(std::span<const TrialResult> trials) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, ArmSummary> arms;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> timing;
  for (const TrialResult& t : trials) {
    const Key key{t.notion, t.mode, t.group};
    ArmSummary& a = arms[key];
    a.group = t.group;
    a.notion = t.notion;
    a.mode = t.mode;
    ++a.trials;
    a.robots += t.robots;
    a.reached += t.reached;
    a.improved += t.improved ? 1 : 0;
    timing[key].first.push_back(t.plan_seconds_mean);
    timing[key].second.push_back(t.safe_seconds_mean);
  }
  std::vector<ArmSummary> out;
  for (auto& [key, a] : arms) {
    a.success_rate = a.robots ? static_cast<double>(a.reached) / a.robots : 0.0;
    a.improvement_rate = a.trials ? static_cast<double>(a.improved) / a.trials : 0.0;
    a.plan = phase_stats(timing[key].first);
    a.safe = phase_stats(timing[key].second);
    out.push_back(a);
  }
  return out;
}

ArmSummary ExperimentSummary::pooled(const std::string& notion, const std::string& mode) const {
  std::vector<TrialResult> subset;
  for (const TrialResult& t : trials) {
    if (t.notion == notion && t.mode == mode) {
      subset.push_back(t);
      subset.back().group = 0;
    }
  }
  if (subset.empty()) throw MetricError("no trials for " + notion + "/" + mode);
  return summarize_arms(subset).front();
}

const ArmSummary* ExperimentSummary::find(int group, const std::string& notion,
                                          const std::string& mode) const {
  for (const ArmSummary& a : arms) {
    if (a.group == group && a.notion == notion && a.mode == mode) return &a;
  }
  return nullptr;
}

void write_summary_csv(const ExperimentSummary& s, std::ostream& out) {
  out << "experiment," << s.group_name
      << ",notion,mode,replan_every,eta_scale,tracking_only,trials,robots,reached,success_rate,"
         "improved,improvement_rate,plan_mean_s,plan_std_s,plan_max_s,safe_mean_s,safe_std_s,"
         "safe_max_s\n";
  out << std::setprecision(10);
  for (const ArmSummary& a : s.arms) {
    out << s.experiment << ',' << a.group << ',' << a.notion << ',' << a.mode << ','
        << s.replan_every << ',' << s.eta_scale << ',' << (s.tracking_only ? 1 : 0) << ','
        << a.trials << ',' << a.robots << ',' << a.reached << ',' << a.success_rate << ','
        << a.improved << ',' << a.improvement_rate << ',' << a.plan.mean << ',' << a.plan.std
        << ',' << a.plan.max << ',' << a.safe.mean << ',' << a.safe.std << ',' << a.safe.max
        << '\n';
  }
}

namespace {

std::string joined(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

}  // namespace

void write_trials_csv(const ExperimentSummary& s, std::ostream& out) {
  out << "scenario," << s.group_name
      << ",notion,mode,robots,reached,safety_failures,replans,planner_iterations_max,"
         "planner_converged,min_h,f_firefly,f_baseline,improved,e_firefly,e_baseline,"
         "plan_mean_s,safe_mean_s\n";
  out << std::setprecision(10);
  for (const TrialResult& t : s.trials) {
    out << t.scenario << ',' << t.group << ',' << t.notion << ',' << t.mode << ',' << t.robots
        << ',' << t.reached << ',' << t.safety_failures << ',' << t.replans << ','
        << t.planner_iterations_max << ',' << (t.planner_converged ? 1 : 0) << ',' << t.min_h
        << ',' << t.f_firefly << ',' << t.f_baseline << ',' << (t.improved ? 1 : 0) << ','
        << joined(t.e_firefly) << ',' << joined(t.e_baseline) << ',' << t.plan_seconds_mean
        << ',' << t.safe_seconds_mean << '\n';
  }
}

void write_summary_text(const ExperimentSummary& s, std::ostream& out) {
  out << s.experiment << ": " << s.trials.size() << " runs, replan_every " << s.replan_every;
  if (s.tracking_only) out << " (tracking only)";
  out << ", eta scale " << s.eta_scale << '\n';
  out << std::left << std::setw(10) << s.group_name << std::setw(8) << "notion" << std::setw(13)
      << "mode" << std::right << std::setw(8) << "trials" << std::setw(10) << "success"
      << std::setw(10) << "improved" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const ArmSummary& a : s.arms) {
    out << std::left << std::setw(10) << a.group << std::setw(8) << a.notion << std::setw(13)
        << a.mode << std::right << std::setw(8) << a.trials << std::setw(10) << a.success_rate
        << std::setw(10);
    if (a.notion == "none") {
      out << "-";
    } else {
      out << a.improvement_rate;
    }
    out << '\n';
  }
  out << "\nruntime in seconds per step\n";
  out << std::left << std::setw(8) << "robots" << std::right << std::setw(12) << "plan mean"
      << std::setw(12) << "plan std" << std::setw(12) << "plan max" << std::setw(12)
      << "safe mean" << std::setw(12) << "safe std" << std::setw(12) << "safe max" << '\n';
  out << std::setprecision(4);
  for (const RuntimeRow& r : s.runtime) {
    out << std::left << std::setw(8) << r.team_size << std::right << std::setw(12) << r.plan.mean
        << std::setw(12) << r.plan.std << std::setw(12) << r.plan.max << std::setw(12)
        << r.safe.mean << std::setw(12) << r.safe.std << std::setw(12) << r.safe.max << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace firefly
