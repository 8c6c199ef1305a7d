#include "firefly/firefly_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace firefly {

void RunConfig::validate() const {
  if (replan_every < 1) throw std::invalid_argument("run: replan_every must be >= 1");
  if (!(goal_margin >= 0.0)) throw std::invalid_argument("run: goal_margin must be >= 0");
  notion.validate();
  planner.validate();
  safety.validate();
}

RunConfig default_run_config(FairnessKind kind, SafetyMode mode) {
  RunConfig cfg;
  cfg.notion.kind = kind;
  cfg.planner = default_planner_config(kind);
  cfg.safety = mode == SafetyMode::Central ? central_safety_config() : distributed_safety_config();
  return cfg;
}

std::string_view to_string(PostGoal policy) {
  return policy == PostGoal::Continue ? "continue" : "hold";
}

PostGoal post_goal_from_string(std::string_view name) {
  if (name == "continue") return PostGoal::Continue;
  if (name == "hold") return PostGoal::Hold;
  throw std::invalid_argument("unknown post-goal policy '" + std::string(name) + "'");
}

std::string_view to_string(RobotStatus status) {
  switch (status) {
    case RobotStatus::Reached: return "reached";
    case RobotStatus::NotReached: return "not_reached";
    case RobotStatus::FailedSafe: return "failed_safe";
  }
  return "?";
}

TeamPlan RunRecord::executed_plan() const {
  TeamPlan plan = TeamPlan::zeros(horizons);
  for (int t = 0; t < steps(); ++t) {
    for (int k = 0; k < robots; ++k) {
      if (t < horizons[k]) plan.set_input(k, t, inputs[t][k].acceleration);
    }
  }
  plan.prefix_len = steps();
  return plan;
}

double RunRecord::min_h() const {
  double h = kNoBarrier;
  for (const auto& r : reports) h = std::min(h, r.h);
  return h;
}

int RunRecord::reached_count() const {
  return static_cast<int>(std::count(status.begin(), status.end(), RobotStatus::Reached));
}

namespace {

// FNV-1a over the raw bytes of the doubles.
struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void add(double x) {
    if (x == 0.0) x = 0.0;  // fold -0
    unsigned char b[sizeof(double)];
    std::memcpy(b, &x, sizeof x);
    for (unsigned char c : b) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
};

}  // namespace

std::uint64_t prefix_hash(const TeamPlan& plan, int len) {
  Fnv f;
  for (int k = 0; k < plan.robot_count(); ++k) {
    const int m = std::min(len, plan.horizon(k));
    for (int i = 0; i < 3 * m; ++i) f.add(plan.inputs[k][i]);
  }
  return f.h;
}

std::uint64_t prefix_hash(const std::vector<std::vector<RobotInput>>& inputs, int robots,
                          int len) {
  // Same byte order as the plan overload; callers pass one entry per step.
  Fnv f;
  for (int k = 0; k < robots; ++k) {
    for (int t = 0; t < len && t < static_cast<int>(inputs.size()); ++t) {
      for (int i = 0; i < 3; ++i) f.add(inputs[t][k].acceleration[i]);
    }
  }
  return f.h;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

MissionSpec planning_spec(const MissionSpec& spec, double margin) {
  MissionSpec s = spec;
  for (auto& g : s.goals) g.radius = std::max(g.radius - margin, 0.5 * g.radius);
  return s;
}

void mark_reached(RunRecord& rec, const MissionSpec& spec, int t) {
  for (int k = 0; k < rec.robots; ++k) {
    if (rec.reached_at[k] < 0 && t <= spec.horizons[k] &&
        spec.goals[k].contains(rec.states[t][k].position)) {
      rec.reached_at[k] = t;
    }
  }
}

bool all_reached(const RunRecord& rec) {
  return std::all_of(rec.reached_at.begin(), rec.reached_at.end(), [](int t) { return t >= 0; });
}

void hold_reached(const RunRecord& rec, TeamPlan& plan, std::vector<char>& held, int t) {
  for (int k = 0; k < rec.robots; ++k) {
    if (held[k] || rec.reached_at[k] < 0) continue;
    held[k] = 1;
    for (int i = t; i < plan.horizon(k); ++i) plan.set_input(k, i, Vec3::Zero());
  }
}

RobotInput braking_input(const MissionSpec& spec, const RobotState& s) {
  RobotInput u;
  u.acceleration = (-s.velocity / spec.dt).cwiseMax(spec.u_min).cwiseMin(spec.u_max);
  return u;
}

RunRecord simulate(const MissionSpec& spec, const RunConfig& cfg, bool baseline) {
  validate(spec, 1);
  cfg.validate();
  const int n = spec.robot_count();
  const int horizon = spec.max_horizon();
  const DynamicsModel model(spec.dt);
  const MissionSpec target = planning_spec(spec, cfg.goal_margin);

  RunRecord rec;
  rec.baseline = baseline;
  rec.robots = n;
  rec.horizons = spec.horizons;
  rec.reached_at.assign(n, -1);

  std::vector<RobotState> s(n);
  for (int k = 0; k < n; ++k) s[k].position = spec.starts[k];
  rec.states.push_back(s);
  rec.reports.push_back(barriers(spec, s));
  mark_reached(rec, spec, 0);

  TeamPlan plan = TeamPlan::zeros(spec.horizons);
  for (int k = 0; k < n; ++k) {
    try {
      plan.inputs[k] = min_energy_inputs(target, k, cfg.planner.solver);
    } catch (const std::exception& e) {
      rec.events.push_back("t=0 initial plan: " + std::string(e.what()));
    }
  }

  bool fair = !baseline && n >= 2;
  try {
    rec.solo_energies = solo_baseline(spec, cfg.planner.solver).energies;
  } catch (const std::exception& e) {
    if (fair) rec.events.push_back("fairness disabled: " + std::string(e.what()));
    fair = false;
  }
  const SoloBaseline solo{rec.solo_energies};

  // Held robots keep zero plan inputs from their arrival on; the filter
  // tracks a braking reference for them instead.
  std::vector<char> held(n, 0);
  if (cfg.post_goal == PostGoal::Hold) hold_reached(rec, plan, held, 0);

  std::ostringstream trace;
  for (int t = 0; t < horizon && !all_reached(rec); ++t) {
    const auto step_start = Clock::now();
    bool replanned = false;
    if (fair && t % cfg.replan_every == 0) {
      plan.prefix_len = t;
      try {
        TeamPlan repaired = repair_plan(target, plan, cfg.planner.solver, held);
        PlanStats st;
        plan = plan_fair(target, cfg.notion, solo, repaired, cfg.planner, &st,
                         cfg.record_traces ? &trace : nullptr, held);
        rec.plan_stats.push_back(st);
        ++rec.replans;
        replanned = true;
      } catch (const std::exception& e) {
        ++rec.planning_failures;
        rec.events.push_back("t=" + std::to_string(t) + " re-plan skipped: " + e.what());
      }
    }
    rec.prefix_hashes.push_back(prefix_hash(plan, t));
    const double plan_seconds = seconds_since(step_start);

    std::vector<RobotInput> u_fair(n);
    for (int k = 0; k < n; ++k) {
      if (held[k]) {
        u_fair[k] = braking_input(spec, s[k]);
      } else if (t < spec.horizons[k]) {
        u_fair[k].acceleration = plan.input(k, t);
      }
    }

    const auto safe_start = Clock::now();
    std::vector<RobotInput> u(n);
    double delta = 0.0;
    try {
      const SafeStep step = safe_step(spec, s, u_fair, cfg.safety);
      u = step.inputs;
      delta = step.max_delta();
    } catch (const SafetyInfeasible& e) {
      ++rec.safety_failures;
      rec.events.push_back("t=" + std::to_string(t) + " braking: " + e.what());
      for (int k = 0; k < n; ++k) u[k] = braking_input(spec, s[k]);
    }
    const double safe_seconds = seconds_since(safe_start);

    for (int k = 0; k < n; ++k) {
      u[k].acceleration = u[k].acceleration.cwiseMax(spec.u_min).cwiseMin(spec.u_max);
      if (t < spec.horizons[k]) plan.set_input(k, t, u[k].acceleration);
      s[k] = step(model, s[k], u[k]);
    }
    rec.inputs.push_back(u);
    rec.fair_inputs.push_back(u_fair);
    rec.deltas.push_back(delta);
    rec.replanned.push_back(replanned ? 1 : 0);
    rec.states.push_back(s);
    rec.reports.push_back(barriers(spec, s));
    mark_reached(rec, spec, t + 1);
    if (cfg.post_goal == PostGoal::Hold) hold_reached(rec, plan, held, t + 1);
    rec.timing.push_back({plan_seconds, safe_seconds, seconds_since(step_start)});
  }

  rec.status.resize(n);
  for (int k = 0; k < n; ++k) {
    rec.status[k] = rec.reached_at[k] >= 0     ? RobotStatus::Reached
                    : rec.safety_failures > 0 ? RobotStatus::FailedSafe
                                              : RobotStatus::NotReached;
  }
  rec.planner_trace = trace.str();
  return rec;
}

}  // namespace

RunRecord run(const MissionSpec& spec, const RunConfig& cfg) { return simulate(spec, cfg, false); }

RunRecord run_baseline(const MissionSpec& spec, const RunConfig& cfg) {
  return simulate(spec, cfg, true);
}

void write_run_csv(const RunRecord& rec, std::ostream& out) {
  out << "t,robot,px,py,pz,vx,vy,vz,ax,ay,az,h,V,delta,replanned\n";
  out << std::setprecision(10);
  for (int t = 0; t < rec.steps(); ++t) {
    for (int k = 0; k < rec.robots; ++k) {
      const RobotState& s = rec.states[t][k];
      const Vec3& a = rec.inputs[t][k].acceleration;
      out << t << ',' << k;
      for (int i = 0; i < 3; ++i) out << ',' << s.position[i];
      for (int i = 0; i < 3; ++i) out << ',' << s.velocity[i];
      for (int i = 0; i < 3; ++i) out << ',' << a[i];
      out << ',' << rec.reports[t].h << ',' << rec.reports[t].V << ',' << rec.deltas[t] << ','
          << rec.replanned[t] << '\n';
    }
  }
}

void write_run_summary(const RunRecord& rec, const MissionSpec& spec, const RunConfig& cfg,
                       std::ostream& out) {
  out << std::setprecision(10);
  out << "mode: " << (rec.baseline ? "baseline" : "firefly") << '\n';
  if (!rec.baseline) out << "notion: " << to_string(cfg.notion.kind) << '\n';
  out << "safe_mode: " << to_string(cfg.safety.mode) << '\n';
  out << "replan_every: " << cfg.replan_every << '\n';
  out << "post_goal: " << to_string(cfg.post_goal) << '\n';
  out << "seed: " << cfg.seed << '\n';
  out << "robots: " << rec.robots << '\n';
  out << "horizon: " << spec.max_horizon() << '\n';
  out << "steps: " << rec.steps() << '\n';
  out << "replans: " << rec.replans << '\n';
  out << "safety_failures: " << rec.safety_failures << '\n';
  out << "planning_failures: " << rec.planning_failures << '\n';
  out << "min_h: " << rec.min_h() << '\n';
  out << "reached: " << rec.reached_count() << '/' << rec.robots << '\n';

  Eigen::VectorXd e;
  const bool have_e = rec.solo_energies.size() == static_cast<std::size_t>(rec.robots);
  if (have_e) e = normalized_energy(rec.executed_plan(), SoloBaseline{rec.solo_energies});
  for (int k = 0; k < rec.robots; ++k) {
    out << "robot " << k << ": " << to_string(rec.status[k]) << " at " << rec.reached_at[k];
    if (have_e) out << " e " << e[k];
    out << '\n';
  }
  if (have_e && rec.robots >= 2) {
    const TeamPlan exec = rec.executed_plan();
    const SoloBaseline solo{rec.solo_energies};
    for (FairnessKind kind :
         {FairnessKind::F1, FairnessKind::F2, FairnessKind::F3, FairnessKind::F4}) {
      FairnessNotion notion = cfg.notion;
      notion.kind = kind;
      out << "executed_" << to_string(kind) << ": " << evaluate(notion, exec, solo) << '\n';
    }
  }
  if (!rec.plan_stats.empty()) {
    out << "planned_f_initial: " << rec.plan_stats.front().f_initial << '\n';
    out << "planned_f_final: " << rec.plan_stats.front().f_final << '\n';
  }
  double plan_sum = 0.0, safe_sum = 0.0, plan_max = 0.0, safe_max = 0.0;
  for (const auto& tm : rec.timing) {
    plan_sum += tm.plan_seconds;
    safe_sum += tm.safe_seconds;
    plan_max = std::max(plan_max, tm.plan_seconds);
    safe_max = std::max(safe_max, tm.safe_seconds);
  }
  const double steps = std::max(1, rec.steps());
  out << "plan_seconds_mean: " << plan_sum / steps << '\n';
  out << "plan_seconds_max: " << plan_max << '\n';
  out << "safe_seconds_mean: " << safe_sum / steps << '\n';
  out << "safe_seconds_max: " << safe_max << '\n';
  for (const auto& ev : rec.events) out << "event: " << ev << '\n';
}

}  // namespace firefly
