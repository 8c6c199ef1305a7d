#include "firefly/fair_planner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace firefly {

double PlannerConfig::gamma(int r) const {
  if (max_iters <= 1 || r <= 1) return gamma_start;
  if (r >= max_iters) return gamma_end;
  const double frac = static_cast<double>(r - 1) / static_cast<double>(max_iters - 1);
  return gamma_start + (gamma_end - gamma_start) * frac;
}

void PlannerConfig::validate() const {
  if (max_iters < 0) throw std::invalid_argument("planner: max_iters must be >= 0");
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("planner: eta must be positive");
  if (!(gamma_start > 0.0 && gamma_start <= 1.0 && gamma_end > 0.0 && gamma_end <= gamma_start)) {
    throw std::invalid_argument("planner: step sizes must satisfy 0 < gamma_end <= gamma_start <= 1");
  }
  if (!(eps_min <= 0.0 && eps_max >= 0.0)) {
    throw std::invalid_argument("planner: descent box must contain zero");
  }
  if (!(kappa > 0.0)) throw std::invalid_argument("planner: kappa must be positive");
  if (threads < 1) throw std::invalid_argument("planner: threads must be >= 1");
}

PlannerConfig default_planner_config(FairnessKind kind) {
  PlannerConfig cfg;
  cfg.convergence_tol = (kind == FairnessKind::F1 || kind == FairnessKind::F2) ? 0.5 : 0.1;
  return cfg;
}

namespace {

// Coefficient of u[t] in p[H], t = first..H-1, as a 3 x 3(H-first) block row.
Eigen::MatrixXd terminal_map(const DynamicsModel& model, int horizon, int first) {
  const int m = horizon - first;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(3, 3 * m);
  for (int i = 0; i < m; ++i) {
    F.block<3, 3>(0, 3 * i).diagonal().setConstant(model.position_gain(horizon - 1 - (first + i)));
  }
  return F;
}

ConvexProgram projection_program(const MissionSpec& spec, int k, const Eigen::VectorXd& u,
                                 int first) {
  const int h = spec.horizons[k];
  const int m = h - first;
  ConvexProgram p(3 * m);
  const Eigen::VectorXd tail = u.tail(3 * m);
  p.P.diagonal().setConstant(2.0);
  p.q = -2.0 * tail;
  p.lower.setConstant(spec.u_min);
  p.upper.setConstant(spec.u_max);
  const DynamicsModel model(spec.dt);
  Eigen::VectorXd head = u;
  head.tail(3 * m).setZero();
  const Vec3 fixed_part = terminal_position(spec, k, head);
  p.add_ball(terminal_map(model, h, first), fixed_part - spec.goals[k].center,
             spec.goals[k].radius);
  p.initial_point = tail.cwiseMax(spec.u_min).cwiseMin(spec.u_max);
  return p;
}

}  // namespace

Vec3 terminal_position(const MissionSpec& spec, int k, const Eigen::VectorXd& u) {
  const DynamicsModel model(spec.dt);
  const int h = static_cast<int>(u.size() / 3);
  Vec3 p = spec.starts[k];
  for (int t = 0; t < h; ++t) p += model.position_gain(h - 1 - t) * u.segment<3>(3 * t);
  return p;
}

Eigen::VectorXd min_energy_inputs(const MissionSpec& spec, int k, const SolverSettings& settings) {
  const int h = spec.horizons[k];
  if (spec.goals[k].contains(spec.starts[k])) return Eigen::VectorXd::Zero(3 * h);
  const ConvexProgram p = projection_program(spec, k, Eigen::VectorXd::Zero(3 * h), 0);
  const SolveResult r = solve(p, settings);
  if (r.status == SolveStatus::Infeasible) {
    throw MissionInfeasible(k, "robot " + std::to_string(k) +
                                   ": goal is unreachable within the horizon under the input box");
  }
  if (r.status != SolveStatus::Optimal) {
    throw PlanningError(k, 0, "robot " + std::to_string(k) + ": minimum-energy solve did not converge");
  }
  return r.x;
}

TeamPlan initial_plan(const MissionSpec& spec, const SolverSettings& settings) {
  validate(spec, 1);
  TeamPlan plan;
  for (int k = 0; k < spec.robot_count(); ++k) {
    plan.inputs.push_back(min_energy_inputs(spec, k, settings));
  }
  return plan;
}

SoloBaseline solo_baseline(const MissionSpec& spec, const SolverSettings& settings) {
  validate(spec, 1);
  SoloBaseline b;
  for (int k = 0; k < spec.robot_count(); ++k) {
    const double e = min_energy_inputs(spec, k, settings).squaredNorm();
    if (!(e > 0.0)) {
      throw FairnessError("invalid baseline: robot " + std::to_string(k) +
                          " starts inside its goal, solo energy is zero");
    }
    b.energies.push_back(e);
  }
  return b;
}

ConvexProgram local_problem(int k, const TeamPlan& plan, const Eigen::VectorXd& gradient,
                            const PlannerConfig& cfg, const MissionSpec& spec) {
  const Eigen::VectorXd& u = plan.inputs[k];
  const int h = plan.horizon(k);
  const int first = std::min(plan.prefix_len, h);
  const int m = h - first;
  ConvexProgram p(3 * m);
  if (m == 0) return p;
  const Eigen::VectorXd tail = u.tail(3 * m);
  p.P.diagonal().setConstant(2.0 * cfg.kappa);
  p.q = gradient.tail(3 * m);
  p.lower = (spec.u_min - tail.array()).max(cfg.eps_min).matrix();
  p.upper = (spec.u_max - tail.array()).min(cfg.eps_max).matrix();
  const DynamicsModel model(spec.dt);
  p.add_ball(terminal_map(model, h, first), terminal_position(spec, k, u) - spec.goals[k].center,
             spec.goals[k].radius);
  p.initial_point = Eigen::VectorXd::Zero(3 * m);
  return p;
}

bool plan_feasible(const MissionSpec& spec, const TeamPlan& plan, int k, double tol) {
  const Eigen::VectorXd& u = plan.inputs[k];
  if (u.size() > 0 && (u.maxCoeff() > spec.u_max + tol || u.minCoeff() < spec.u_min - tol)) {
    return false;
  }
  const double r = spec.goals[k].radius;
  return (terminal_position(spec, k, u) - spec.goals[k].center).squaredNorm() <= r * r + tol;
}

namespace {

bool is_frozen(std::span<const char> frozen, int k) {
  return k < static_cast<int>(frozen.size()) && frozen[k];
}

}  // namespace

TeamPlan repair_plan(const MissionSpec& spec, const TeamPlan& plan, const SolverSettings& settings,
                     std::span<const char> frozen) {
  TeamPlan out = plan;
  for (int k = 0; k < plan.robot_count(); ++k) {
    const int h = plan.horizon(k);
    const int first = std::min(plan.prefix_len, h);
    if (first == h || is_frozen(frozen, k) || plan_feasible(spec, plan, k, 1e-9)) continue;
    const ConvexProgram p = projection_program(spec, k, plan.inputs[k], first);
    const SolveResult r = solve(p, settings);
    if (r.status == SolveStatus::Infeasible) {
      throw MissionInfeasible(k, "robot " + std::to_string(k) + ": goal no longer reachable at step " +
                                     std::to_string(first));
    }
    if (r.status != SolveStatus::Optimal && r.primal_residual > settings.feas_tol) {
      throw PlanningError(k, 0, "robot " + std::to_string(k) + ": plan repair did not converge");
    }
    out.inputs[k].tail(r.x.size()) = r.x;
  }
  return out;
}

TeamPlan plan_fair(const MissionSpec& spec, const FairnessNotion& notion,
                   const SoloBaseline& baseline, const TeamPlan& initial,
                   const PlannerConfig& cfg, PlanStats* stats, std::ostream* trace,
                   std::span<const char> frozen) {
  cfg.validate();
  notion.validate();
  const int n = initial.robot_count();
  PlanStats local;
  PlanStats& st = stats ? *stats : local;
  st = PlanStats{};

  // A single robot has no variance to reduce.
  if (n < 2 || cfg.max_iters == 0) {
    if (n >= 2) st.f_initial = st.f_final = evaluate(notion, initial, baseline);
    return initial;
  }

  TeamPlan u = initial;
  st.f_initial = evaluate(notion, u, baseline);
  double f = st.f_initial;

  if (trace) *trace << "iteration,gamma,f,step_norm,status\n";

  std::vector<Eigen::VectorXd> eps(n);
  std::vector<SolveStatus> status(n, SolveStatus::Optimal);
  std::vector<int> failed(n, 0);

  for (int r = 1; r <= cfg.max_iters; ++r) {
    const TeamPlan& snapshot = u;
    auto work = [&](int k) {
      const int m = snapshot.horizon(k) - std::min(snapshot.prefix_len, snapshot.horizon(k));
      if (m == 0 || is_frozen(frozen, k)) {
        eps[k] = Eigen::VectorXd();
        return;
      }
      const Eigen::VectorXd g = gradient(notion, snapshot, baseline, k);
      const SolveResult res = solve(local_problem(k, snapshot, g, cfg, spec), cfg.solver);
      status[k] = res.status;
      // eps = 0 is always feasible, so only a non-converged solve can fail.
      failed[k] = res.status != SolveStatus::Optimal && res.primal_residual > cfg.solver.feas_tol;
      eps[k] = res.x;
    };
    if (cfg.threads > 1 && n > 1) {
      const int workers = std::min(cfg.threads, n);
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (int k = w; k < n; k += workers) work(k);
        });
      }
    } else {
      for (int k = 0; k < n; ++k) work(k);
    }
    for (int k = 0; k < n; ++k) {
      if (failed[k]) {
        throw PlanningError(k, r, "robot " + std::to_string(k) + ": local problem " +
                                      std::string(to_string(status[k])) + " at iteration " +
                                      std::to_string(r));
      }
    }

    // Scheduled step, halved while it would raise the team objective. The
    // surge notions are nonsmooth on the scale of a single step, and an
    // unguarded step can run away.
    double gamma = cfg.gamma(r);
    double eps_sq = 0.0;
    for (int k = 0; k < n; ++k) eps_sq += eps[k].squaredNorm();
    const double eps_norm = std::sqrt(eps_sq);
    TeamPlan next = u;
    double f_next = f;
    bool accepted = false;
    for (;;) {
      for (int k = 0; k < n; ++k) {
        if (eps[k].size() == 0) continue;
        next.inputs[k].tail(eps[k].size()) = u.inputs[k].tail(eps[k].size()) + gamma * eps[k];
      }
      f_next = evaluate(notion, next, baseline);
      if (f_next <= f) {
        accepted = true;
        break;
      }
      if (gamma * eps_norm <= cfg.convergence_tol) break;
      gamma *= 0.5;
      ++st.backtracks;
    }
    const double step_norm = accepted ? gamma * eps_norm : 0.0;
    if (accepted) {
      u = std::move(next);
      f = f_next;
    }
    st.iterations = r;
    if (trace) {
      *trace << r << ',' << (accepted ? gamma : 0.0) << ',' << f << ',' << step_norm << ',';
      for (int k = 0; k < n; ++k) *trace << (k ? ";" : "") << to_string(status[k]);
      *trace << '\n';
    }
    if (step_norm <= cfg.convergence_tol) {
      st.converged = true;
      break;
    }
  }

  st.f_final = f;
  return u;
}

}  // namespace firefly
