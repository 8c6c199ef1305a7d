// Acceptance suite: runs the desk-scale sweeps once, then prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.
// Usage: firefly_acceptance [out_dir]   (sweep outputs are written there if given)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "firefly/experiment.hpp"
#include "firefly/solver.hpp"
#include "support/active_set_oracle.hpp"
#include "support/finite_difference.hpp"
#include "support/plan_sampling.hpp"

using namespace firefly;

namespace {

constexpr std::uint64_t kSeed = 20240917;
const std::vector<std::string> kNotions{"f1", "f2", "f3", "f4"};

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentSummary timed(const char* label, const SweepOptions& o, bool team_sweep,
                        const std::string& out_root) {
  SweepOptions opts = o;
  if (!out_root.empty()) opts.out_dir = std::filesystem::path(out_root) / label;
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSummary s = team_sweep ? run_experiment2(opts) : run_experiment1(opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "== " << label << " (" << fmt("%.1f", secs) << " s)\n";
  write_summary_text(s, std::cout);
  std::cout << '\n';
  return s;
}

// 1. runtime per step
Verdict runtime_budget(const ExperimentSummary& small, const ExperimentSummary& n20) {
  bool pass = true;
  std::ostringstream d;
  for (const RuntimeRow& r : small.runtime) {
    pass = pass && r.team_size <= 15 && r.plan.mean < 1.0 && r.safe.mean < 1.0;
    d << fmt("N=%d plan %.4f safe %.4f; ", r.team_size, r.plan.mean, r.safe.mean);
  }
  if (n20.runtime.size() != 1 || small.runtime.empty()) return {1, false, "missing runtime rows"};
  const RuntimeRow& big = n20.runtime.front();
  const RuntimeRow& least = small.runtime.front();
  const bool within = big.plan.max < 300.0 && big.safe.max < 300.0;
  const bool grows = big.plan.mean + big.safe.mean > least.plan.mean + least.safe.mean;
  d << fmt("N=20 plan %.4f (max %.4f) safe %.4f (max %.4f)", big.plan.mean, big.plan.max,
           big.safe.mean, big.safe.max);
  return {1, pass && within && grows, d.str()};
}

// 2. distributed success
Verdict exp1_success(const ExperimentSummary& s) {
  bool pass = true;
  std::ostringstream d;
  for (const std::string& n : kNotions) {
    const ArmSummary a = s.pooled(n, "distributed");
    pass = pass && a.success_rate >= 0.95;
    d << fmt("%s %.3f ", n.c_str(), a.success_rate);
  }
  return {2, pass, d.str() + "(need >= 0.95)"};
}

// 3. distributed fairness improvement
Verdict exp1_improvement(const ExperimentSummary& s) {
  bool pass = true;
  std::ostringstream d;
  for (const std::string& n : kNotions) {
    const ArmSummary a = s.pooled(n, "distributed");
    pass = pass && a.improvement_rate >= 0.90;
    d << fmt("%s %.3f ", n.c_str(), a.improvement_rate);
  }
  return {3, pass, d.str() + "(need >= 0.90)"};
}

// 4. central beats the baseline, success non-increasing in obstacles within one robot
Verdict central_trend(const ExperimentSummary& s, const std::vector<int>& groups) {
  const ArmSummary base = s.pooled("none", "central");
  bool pass = true;
  std::ostringstream d;
  d << fmt("baseline %.3f; ", base.success_rate);
  for (const std::string& n : kNotions) {
    const ArmSummary a = s.pooled(n, "central");
    pass = pass && a.success_rate > base.success_rate;
    d << fmt("%s %.3f [", n.c_str(), a.success_rate);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const ArmSummary* gi = s.find(groups[i], n, "central");
      if (!gi) return {4, false, "missing arm"};
      d << gi->reached << (i + 1 < groups.size() ? "," : "");
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const ArmSummary* gj = s.find(groups[j], n, "central");
        if (!gj || gj->reached > gi->reached + 1) pass = false;
      }
    }
    d << "] ";
  }
  return {4, pass, d.str()};
}

// 5. analytic vs central-difference gradients
Verdict gradient_suite() {
  std::mt19937_64 rng(kSeed);
  std::uniform_int_distribution<int> robots(2, 5), horizon(3, 25);
  double worst = 0.0;
  for (FairnessKind kind : {FairnessKind::F1, FairnessKind::F2, FairnessKind::F3,
                            FairnessKind::F4}) {
    const bool surge = kind == FairnessKind::F3 || kind == FairnessKind::F4;
    FairnessNotion notion;
    notion.kind = kind;
    int done = 0;
    while (done < 100) {
      auto s = testing::random_plan(rng, robots(rng), horizon(rng));
      if (surge && testing::surge_kink_margin(s, notion.surge_threshold, notion.surge_hinge) < 1e-3)
        continue;
      const int k = done % s.plan.robot_count();
      auto f = [&](const Eigen::VectorXd& uk) {
        TeamPlan p = s.plan;
        p.inputs[k] = uk;
        return evaluate(notion, p, s.baseline);
      };
      const Eigen::VectorXd fd = testing::central_difference(f, s.plan.inputs[k]);
      worst = std::max(worst, testing::relative_error(gradient(notion, s.plan, s.baseline, k), fd));
      ++done;
    }
  }
  return {5, worst < 1e-5, fmt("max relative error %.3e over 400 plans (need < 1e-5)", worst)};
}

// 6 and 7. invariants over every trial of every sweep
Verdict energy_invariant(const std::vector<const ExperimentSummary*>& all) {
  double worst = std::numeric_limits<double>::infinity();
  long checked = 0, bad = 0;
  for (const ExperimentSummary* s : all) {
    for (const TrialResult& t : s->trials) {
      if (t.e_firefly.size() != static_cast<Eigen::Index>(t.reached_at.size())) continue;
      for (std::size_t k = 0; k < t.reached_at.size(); ++k) {
        if (t.reached_at[k] < 0) continue;
        const double e = t.e_firefly[static_cast<Eigen::Index>(k)];
        worst = std::min(worst, e);
        ++checked;
        if (e < 1.0 - 1e-6) ++bad;
      }
    }
  }
  return {6, checked > 0 && bad == 0,
          fmt("min e_k %.9f over %ld reached robots, %ld below 1 - 1e-6", worst, checked, bad)};
}

Verdict safety_invariant(const std::vector<const ExperimentSummary*>& all) {
  double worst = std::numeric_limits<double>::infinity();
  long runs = 0, bad = 0;
  for (const ExperimentSummary* s : all) {
    for (const TrialResult& t : s->trials) {
      worst = std::min(worst, t.min_h);
      ++runs;
      if (t.min_h < -1e-6) ++bad;
    }
  }
  return {7, runs > 0 && bad == 0, fmt("min h %.3e over %ld runs, %ld below -1e-6", worst, runs, bad)};
}

// 8. planner termination and monotonicity on the obstacle sweep
Verdict convergence(const ExperimentSummary& s) {
  int iters = 0;
  double rise = -std::numeric_limits<double>::infinity();
  long plans = 0;
  for (const TrialResult& t : s.trials) {
    if (t.notion == "none") continue;
    iters = std::max(iters, t.planner_iterations_max);
    rise = std::max(rise, t.planned_f_increase);
    plans += t.replans;
  }
  return {8, iters <= 1000 && rise <= 1e-9,
          fmt("max iterations %d, max f_final - f_initial %.3e over %ld plans", iters, rise, plans)};
}

// 9. solver against active-set enumeration
Verdict solver_oracle() {
  std::mt19937_64 rng(kSeed + 9);
  std::uniform_int_distribution<int> dim(2, 12);
  double worst = 0.0;
  int failures = 0;
  for (int i = 0; i < 50; ++i) {
    const auto qp = testing::random_small_qp(rng, dim(rng));
    const auto oracle = testing::enumerate_active_sets(qp);
    ConvexProgram p(static_cast<int>(qp.q.size()));
    p.P = qp.P;
    p.q = qp.q;
    for (Eigen::Index r = 0; r < qp.A_eq.rows(); ++r) p.add_equality(qp.A_eq.row(r), qp.b_eq[r]);
    for (Eigen::Index r = 0; r < qp.G.rows(); ++r) p.add_inequality(qp.G.row(r), qp.h[r]);
    p.lower = qp.lo;
    p.upper = qp.hi;
    const SolveResult r = solve(p);
    if (!oracle || r.status != SolveStatus::Optimal) {
      ++failures;
      continue;
    }
    worst = std::max(worst, std::abs(r.objective - oracle->objective));
  }
  return {9, failures == 0 && worst <= 1e-6,
          fmt("max objective gap %.3e over 50 programs, %d unsolved", worst, failures)};
}

// 10. tighter eta on N = 20
Verdict tradeoff(const ExperimentSummary& loose, const ExperimentSummary& tight) {
  if (loose.runtime.empty() || tight.runtime.empty()) return {10, false, "missing runtime rows"};
  auto rate = [](const ExperimentSummary& s) {
    int improved = 0, n = 0;
    for (const TrialResult& t : s.trials) {
      if (t.notion == "none") continue;
      improved += t.improved ? 1 : 0;
      ++n;
    }
    return n ? static_cast<double>(improved) / n : 0.0;
  };
  const double t0 = loose.runtime.front().plan.mean, t1 = tight.runtime.front().plan.mean;
  const double r0 = rate(loose), r1 = rate(tight);
  return {10, t1 > t0 && r1 >= r0,
          fmt("plan mean %.4f -> %.4f s, improvement rate %.3f -> %.3f", t0, t1, r0, r1)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_root = argc > 1 ? argv[1] : "";

  SweepOptions e1 = experiment1_defaults();
  e1.seed = kSeed;
  const ExperimentSummary exp1 = timed("exp1", e1, false, out_root);

  SweepOptions e2 = experiment2_defaults();
  e2.seed = kSeed + 1;
  e2.trials = 5;
  const ExperimentSummary exp2 = timed("exp2", e2, true, out_root);

  SweepOptions big = experiment2_defaults();
  big.seed = kSeed + 2;
  big.trials = 10;
  big.groups = {20};
  const ExperimentSummary n20 = timed("n20_eta1", big, true, out_root);
  big.eta_scale = 5.0;
  const ExperimentSummary n20_tight = timed("n20_eta5", big, true, out_root);

  const std::vector<const ExperimentSummary*> all{&exp1, &exp2, &n20, &n20_tight};
  const std::vector<Verdict> verdicts{
      runtime_budget(exp2, n20),   exp1_success(exp1),     exp1_improvement(exp1),
      central_trend(exp1, e1.groups), gradient_suite(),    energy_invariant(all),
      safety_invariant(all),       convergence(exp1),      solver_oracle(),
      tradeoff(n20, n20_tight)};

  int failed = 0;
  for (const Verdict& v : verdicts) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << v.id << ": " << v.detail << '\n';
    failed += v.pass ? 0 : 1;
  }
  std::cout << (verdicts.size() - failed) << '/' << verdicts.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
