#include "firefly/safe_control.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/Geometry>

namespace firefly {

std::string_view to_string(SafetyMode mode) {
  return mode == SafetyMode::Central ? "central" : "distributed";
}

SafetyMode safety_mode_from_string(std::string_view name) {
  if (name == "central") return SafetyMode::Central;
  if (name == "distributed") return SafetyMode::Distributed;
  throw std::invalid_argument("unknown safe mode '" + std::string(name) + "'");
}

void SafetyConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("safety: alpha must be in (0, 1]");
  if (!(lambda > 0.0)) throw std::invalid_argument("safety: lambda must be positive");
  if (dist_rounds < 0) throw std::invalid_argument("safety: dist_rounds must be >= 0");
  if (!(dist_tol > 0.0)) throw std::invalid_argument("safety: dist_tol must be positive");
  if (!(steer >= 0.0)) throw std::invalid_argument("safety: steer must be >= 0");
  if (!(responsibility > 0.0 && responsibility < 1.0)) {
    throw std::invalid_argument("safety: responsibility must be in (0, 1)");
  }
  if (threads < 1) throw std::invalid_argument("safety: threads must be >= 1");
}

SafetyConfig central_safety_config() { return SafetyConfig{}; }

SafetyConfig distributed_safety_config() {
  SafetyConfig cfg;
  cfg.alpha = 0.1;
  cfg.lambda = 0.1;
  cfg.mode = SafetyMode::Distributed;
  return cfg;
}

double SafeStep::max_delta() const {
  double m = 0.0;
  for (double d : deltas) m = std::max(m, d);
  return m;
}

BarrierReport barriers(const MissionSpec& spec, std::span<const RobotState> states) {
  BarrierReport r;
  const int n = static_cast<int>(states.size());
  for (int k = 0; k < n; ++k) {
    const Vec3& p = states[k].position;
    for (int o = 0; o < static_cast<int>(spec.obstacles.size()); ++o) {
      const auto& obs = spec.obstacles[o];
      const double h = (p - obs.center).squaredNorm() - obs.radius * obs.radius;
      if (h < r.h_obstacle) {
        r.h_obstacle = h;
        r.obstacle_robot = k;
        r.obstacle_index = o;
      }
    }
    for (int j = k + 1; j < n; ++j) {
      const double h = (states[j].position - p).squaredNorm() - spec.separation * spec.separation;
      if (h < r.h_separation) {
        r.h_separation = h;
        r.pair_first = k;
        r.pair_second = j;
      }
    }
    if (k < static_cast<int>(spec.goals.size())) {
      const auto& g = spec.goals[k];
      const double v = (p - g.center).squaredNorm() - g.radius * g.radius;
      if (v > r.V) {
        r.V = v;
        r.clf_robot = k;
      }
    }
  }
  r.h = std::min(r.h_obstacle, r.h_separation);
  return r;
}

double CbfRow::margin(std::span<const RobotInput> u) const {
  double lhs = coef_first.dot(u[first].acceleration);
  if (second >= 0) lhs += coef_second.dot(u[second].acceleration);
  return lhs - rhs;
}

namespace {

Vec3 drift_position(const RobotState& s, double dt) { return s.position + dt * s.velocity; }

}  // namespace

std::vector<CbfRow> cbf_rows(const MissionSpec& spec, std::span<const RobotState> states,
                             double alpha, CbfFloor mode) {
  const double b = 0.5 * spec.dt * spec.dt;
  const int n = static_cast<int>(states.size());
  const double h_min = barriers(spec, states).h;
  auto floor = [&](double h_now) {
    return (1.0 - alpha) * (mode == CbfFloor::Composite ? h_min : h_now);
  };
  std::vector<CbfRow> rows;
  for (int k = 0; k < n; ++k) {
    const Vec3 ph = drift_position(states[k], spec.dt);
    for (int o = 0; o < static_cast<int>(spec.obstacles.size()); ++o) {
      const auto& obs = spec.obstacles[o];
      const double r2 = obs.radius * obs.radius;
      CbfRow row;
      row.first = k;
      row.obstacle = o;
      row.coef_first = 2.0 * b * (ph - obs.center);
      row.rhs = floor((states[k].position - obs.center).squaredNorm() - r2) -
                ((ph - obs.center).squaredNorm() - r2);
      rows.push_back(row);
    }
  }
  const double d2 = spec.separation * spec.separation;
  for (int k = 0; k < n; ++k) {
    const Vec3 ph_k = drift_position(states[k], spec.dt);
    for (int j = k + 1; j < n; ++j) {
      const Vec3 ph_j = drift_position(states[j], spec.dt);
      CbfRow row;
      row.first = k;
      row.second = j;
      row.coef_first = 2.0 * b * (ph_k - ph_j);
      row.coef_second = -row.coef_first;
      row.rhs = floor((states[k].position - states[j].position).squaredNorm() - d2) -
                ((ph_k - ph_j).squaredNorm() - d2);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<RobotInput> steered_reference(const MissionSpec& spec,
                                          std::span<const RobotState> states,
                                          std::span<const RobotInput> u_fair,
                                          std::span<const CbfRow> rows, double gain) {
  std::vector<RobotInput> out(u_fair.begin(), u_fair.end());
  if (gain <= 0.0) return out;
  for (const CbfRow& row : rows) {
    const double m = row.margin(u_fair);
    if (m >= 0.0) continue;
    const double share = row.second >= 0 ? 0.5 : 1.0;
    for (int side = 0; side < 2; ++side) {
      const int k = side == 0 ? row.first : row.second;
      if (k < 0) continue;
      const Vec3& coef = side == 0 ? row.coef_first : row.coef_second;
      const double cn = coef.norm();
      if (cn < 1e-12) continue;
      const Vec3 nrm = coef / cn;
      const Vec3 to_goal = spec.goals[k].center - states[k].position;
      Vec3 tangent = to_goal - to_goal.dot(nrm) * nrm;
      if (tangent.norm() < 0.1 * to_goal.norm() || tangent.norm() < 1e-9) {
        // Head-on: fixed handedness, so the two robots of a pair swerve apart.
        tangent = nrm.cross(Vec3::UnitZ());
        if (tangent.norm() < 1e-6) tangent = nrm.cross(Vec3::UnitX());
      }
      out[k].acceleration += gain * share * (-m / cn) * tangent.normalized();
    }
  }
  for (auto& u : out) u.acceleration = u.acceleration.cwiseMax(spec.u_min).cwiseMin(spec.u_max);
  return out;
}

namespace {

// ||p_hat + b u - c||^2 - r^2 <= (1 - lambda dt) V + delta, as a ball over
// (u block at `u_offset`, delta at `delta_index`) in an n-variable program.
void add_clf_row(ConvexProgram& p, const MissionSpec& spec, const RobotState& s, int k,
                 int u_offset, int delta_index, double lambda) {
  const auto& goal = spec.goals[k];
  const double b = 0.5 * spec.dt * spec.dt;
  const double r2 = goal.radius * goal.radius;
  const double V = (s.position - goal.center).squaredNorm() - r2;
  const int n = p.n_vars();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(3, n);
  F.block<3, 3>(0, u_offset).diagonal().setConstant(b);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  a[delta_index] = -1.0;
  const double rhs = r2 + (1.0 - lambda * spec.dt) * V;
  p.add_ball(std::move(F), drift_position(s, spec.dt) - goal.center, std::sqrt(std::max(rhs, 0.0)),
             std::move(a));
}

bool accept(const SolveResult& r, const SolverSettings& s) {
  return r.status == SolveStatus::Optimal ||
         (r.status == SolveStatus::MaxIter && r.primal_residual <= s.feas_tol);
}

void check_inputs(const MissionSpec& spec, std::span<const RobotState> states,
                  std::span<const RobotInput> u_fair) {
  if (static_cast<int>(states.size()) != spec.robot_count() ||
      static_cast<int>(u_fair.size()) != spec.robot_count()) {
    throw std::invalid_argument("safe step: one state and one fair input per robot required");
  }
}

}  // namespace

namespace {

SafeStep central_filter(const MissionSpec& spec, std::span<const RobotState> states,
                        std::span<const RobotInput> fair, const SafetyConfig& cfg,
                        CbfFloor floor) {
  const int n = spec.robot_count();
  const int nv = 3 * n + 1;
  const int di = 3 * n;
  SafeStep out;
  out.report = barriers(spec, states);
  const std::vector<CbfRow> rows = cbf_rows(spec, states, cfg.alpha, floor);
  out.reference = steered_reference(spec, states, fair, rows, cfg.steer);
  const std::vector<RobotInput>& u_fair = out.reference;

  ConvexProgram p(nv);
  p.P.diagonal().setConstant(2.0);
  for (int k = 0; k < n; ++k) {
    p.q.segment<3>(3 * k) = -2.0 * u_fair[k].acceleration;
    p.lower.segment<3>(3 * k).setConstant(spec.u_min);
    p.upper.segment<3>(3 * k).setConstant(spec.u_max);
  }
  for (const auto& row : rows) {
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(nv);
    a.segment<3>(3 * row.first) = -row.coef_first.transpose();
    if (row.second >= 0) a.segment<3>(3 * row.second) = -row.coef_second.transpose();
    p.add_inequality(a, -row.rhs);
  }
  for (int k = 0; k < n; ++k) add_clf_row(p, spec, states[k], k, 3 * k, di, cfg.lambda);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nv);
  for (int k = 0; k < n; ++k) x0.segment<3>(3 * k) = u_fair[k].acceleration;
  p.initial_point = x0.cwiseMax(p.lower).cwiseMin(p.upper);

  const SolveResult r = solve(p, cfg.solver);
  if (!accept(r, cfg.solver)) {
    throw SafetyInfeasible("central safety filter " + std::string(to_string(r.status)) +
                               " (h = " + std::to_string(out.report.h) + ")",
                           out.report);
  }
  out.inputs.resize(n);
  for (int k = 0; k < n; ++k) out.inputs[k].acceleration = r.x.segment<3>(3 * k);
  out.deltas = {r.x[di]};
  out.rounds = 1;
  return out;
}

struct PairBudget {
  int row = -1;          // index into the CBF row list
  double first = 0.0;    // required coef_first . u_first
  double second = 0.0;   // required coef_second . u_second
};

SafeStep distributed_filter(const MissionSpec& spec, std::span<const RobotState> states,
                            std::span<const RobotInput> fair, const SafetyConfig& cfg,
                            CbfFloor floor) {
  const int n = spec.robot_count();
  SafeStep out;
  out.report = barriers(spec, states);
  out.deltas.assign(n, 0.0);
  const std::vector<CbfRow> rows = cbf_rows(spec, states, cfg.alpha, floor);
  out.reference = steered_reference(spec, states, fair, rows, cfg.steer);
  const std::vector<RobotInput>& u_fair = out.reference;
  std::vector<std::vector<int>> own_rows(n);     // obstacle rows
  std::vector<std::vector<int>> pair_of(n);      // budgets touching robot k
  std::vector<PairBudget> budgets;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    const CbfRow& row = rows[i];
    if (row.second < 0) {
      own_rows[row.first].push_back(i);
      continue;
    }
    // Split the shortfall of the fair inputs; the shares sum to rhs.
    const double m1 = row.coef_first.dot(u_fair[row.first].acceleration);
    const double m2 = row.coef_second.dot(u_fair[row.second].acceleration);
    const double slack = m1 + m2 - row.rhs;
    PairBudget b;
    b.row = i;
    b.first = m1 - cfg.responsibility * slack;
    b.second = m2 - (1.0 - cfg.responsibility) * slack;
    pair_of[row.first].push_back(static_cast<int>(budgets.size()));
    pair_of[row.second].push_back(static_cast<int>(budgets.size()));
    budgets.push_back(b);
  }

  const double weight = 1.0 + 1.0 / n;
  std::vector<RobotInput> current(u_fair.begin(), u_fair.end());
  std::vector<RobotInput> next(n);
  std::vector<double> deltas(n, 0.0);
  std::vector<int> failed(n, 0);

  auto local_solve = [&](int k) {
    ConvexProgram p(4);
    p.P.diagonal().head<3>().setConstant(2.0 * weight);
    p.P(3, 3) = 2.0;
    p.q.head<3>() = -2.0 * weight * u_fair[k].acceleration;
    p.lower.head<3>().setConstant(spec.u_min);
    p.upper.head<3>().setConstant(spec.u_max);
    for (int i : own_rows[k]) {
      Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(4);
      a.head<3>() = -rows[i].coef_first.transpose();
      p.add_inequality(a, -rows[i].rhs);
    }
    for (int bi : pair_of[k]) {
      const PairBudget& b = budgets[bi];
      const CbfRow& row = rows[b.row];
      const bool is_first = row.first == k;
      Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(4);
      a.head<3>() = -(is_first ? row.coef_first : row.coef_second).transpose();
      p.add_inequality(a, -(is_first ? b.first : b.second));
    }
    add_clf_row(p, spec, states[k], k, 0, 3, cfg.lambda);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
    x0.head<3>() = current[k].acceleration;
    p.initial_point = x0;
    const SolveResult r = solve(p, cfg.solver);
    failed[k] = !accept(r, cfg.solver);
    next[k].acceleration = r.x.head<3>();
    deltas[k] = r.x[3];
  };

  for (int round = 1; round <= cfg.dist_rounds; ++round) {
    if (cfg.threads > 1 && n > 1) {
      const int workers = std::min(cfg.threads, n);
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (int k = w; k < n; k += workers) local_solve(k);
        });
      }
    } else {
      for (int k = 0; k < n; ++k) local_solve(k);
    }
    for (int k = 0; k < n; ++k) {
      if (failed[k]) {
        throw SafetyInfeasible("distributed safety filter: robot " + std::to_string(k) +
                                   " has no feasible input in round " + std::to_string(round),
                               out.report, k);
      }
    }
    double change = 0.0;
    for (int k = 0; k < n; ++k) {
      change = std::max(change, (next[k].acceleration - current[k].acceleration).norm());
    }
    current = next;
    out.rounds = round;

    // Surplus on one side of a pair relaxes the partner's budget; the sum
    // stays equal to the joint requirement.
    for (PairBudget& b : budgets) {
      const CbfRow& row = rows[b.row];
      const double a1 = row.coef_first.dot(current[row.first].acceleration);
      const double a2 = row.coef_second.dot(current[row.second].acceleration);
      const double s1 = std::max(0.0, a1 - b.first);
      const double s2 = std::max(0.0, a2 - b.second);
      b.first = a1 - s2;
      b.second = a2 - s1;
    }
    if (change <= cfg.dist_tol) break;
  }
  out.inputs = current;
  out.deltas = deltas;
  return out;
}

template <class Filter>
SafeStep with_fallback(const SafetyConfig& cfg, Filter filter) {
  if (!cfg.per_barrier) return filter(CbfFloor::Composite);
  try {
    return filter(CbfFloor::PerBarrier);
  } catch (const SafetyInfeasible&) {
    SafeStep out = filter(CbfFloor::Composite);
    out.relaxed = true;
    return out;
  }
}

}  // namespace

SafeStep central_safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                           std::span<const RobotInput> u_fair, const SafetyConfig& cfg) {
  cfg.validate();
  check_inputs(spec, states, u_fair);
  return with_fallback(
      cfg, [&](CbfFloor floor) { return central_filter(spec, states, u_fair, cfg, floor); });
}

SafeStep distributed_safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                               std::span<const RobotInput> u_fair, const SafetyConfig& cfg) {
  cfg.validate();
  check_inputs(spec, states, u_fair);
  if (cfg.dist_rounds == 0) {
    SafeStep out;
    out.report = barriers(spec, states);
    out.inputs.assign(u_fair.begin(), u_fair.end());
    out.reference = out.inputs;
    out.deltas.assign(spec.robot_count(), 0.0);
    out.warning = true;
    return out;
  }
  return with_fallback(
      cfg, [&](CbfFloor floor) { return distributed_filter(spec, states, u_fair, cfg, floor); });
}

SafeStep safe_step(const MissionSpec& spec, std::span<const RobotState> states,
                   std::span<const RobotInput> u_fair, const SafetyConfig& cfg) {
  return cfg.mode == SafetyMode::Central ? central_safe_step(spec, states, u_fair, cfg)
                                         : distributed_safe_step(spec, states, u_fair, cfg);
}

}  // namespace firefly
