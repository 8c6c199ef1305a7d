#include "firefly/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <json.hpp>

namespace firefly {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ConvexProgram::ConvexProgram(int n_vars)
    : P(Eigen::MatrixXd::Zero(n_vars, n_vars)),
      q(Eigen::VectorXd::Zero(n_vars)),
      A_eq(0, n_vars),
      b_eq(0),
      A_in(0, n_vars),
      b_in(0),
      lower(Eigen::VectorXd::Constant(n_vars, -kInf)),
      upper(Eigen::VectorXd::Constant(n_vars, kInf)) {}

void ConvexProgram::add_equality(const Eigen::RowVectorXd& row, double rhs) {
  A_eq.conservativeResize(A_eq.rows() + 1, n_vars());
  A_eq.row(A_eq.rows() - 1) = row;
  b_eq.conservativeResize(b_eq.size() + 1);
  b_eq[b_eq.size() - 1] = rhs;
}

void ConvexProgram::add_inequality(const Eigen::RowVectorXd& row, double rhs) {
  A_in.conservativeResize(A_in.rows() + 1, n_vars());
  A_in.row(A_in.rows() - 1) = row;
  b_in.conservativeResize(b_in.size() + 1);
  b_in[b_in.size() - 1] = rhs;
}

void ConvexProgram::add_ball(Eigen::MatrixXd F, Eigen::VectorXd g, double radius,
                             Eigen::VectorXd a) {
  balls.push_back(BallConstraint{std::move(F), std::move(g), radius, std::move(a)});
}

double BallConstraint::value(const Eigen::VectorXd& x) const {
  double v = (F * x + g).squaredNorm() - radius * radius;
  if (a.size() > 0) v += a.dot(x);
  return v;
}

double ConvexProgram::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x);
}

void ConvexProgram::validate() const {
  const Eigen::Index n = q.size();
  auto fail = [](const std::string& what) { throw std::invalid_argument("convex program: " + what); };
  if (P.rows() != n || P.cols() != n) fail("P must be n x n");
  if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) fail("equality block has wrong shape");
  if (A_in.cols() != n || A_in.rows() != b_in.size()) fail("inequality block has wrong shape");
  if (lower.size() != n || upper.size() != n) fail("bounds must have n entries");
  if (initial_point.size() != 0 && initial_point.size() != n) fail("initial point has wrong size");
  if (!P.allFinite() || !q.allFinite() || !A_eq.allFinite() || !b_eq.allFinite() ||
      !A_in.allFinite() || !b_in.allFinite()) {
    fail("non-finite data");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i])) fail("NaN bound");
  }
  for (const auto& b : balls) {
    if (b.F.cols() != n || b.F.rows() != b.g.size()) fail("ball constraint has wrong shape");
    if (!b.F.allFinite() || !b.g.allFinite() || !(b.radius >= 0.0)) fail("invalid ball data");
    if (b.a.size() != 0 && (b.a.size() != n || !b.a.allFinite())) fail("invalid ball linear term");
  }
  const double scale = 1.0 + P.cwiseAbs().maxCoeff();
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) fail("P must be symmetric");
  if (n > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(P + 1e-12 * scale * Eigen::MatrixXd::Identity(n, n));
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-9 * scale) {
      fail("P must be positive semidefinite");
    }
  }
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIter: return "max_iter";
  }
  return "?";
}

double primal_residual(const ConvexProgram& p, const Eigen::VectorXd& x) {
  double r = 0.0;
  if (p.A_eq.rows() > 0) r = std::max(r, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  if (p.A_in.rows() > 0) r = std::max(r, (p.A_in * x - p.b_in).maxCoeff());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    r = std::max(r, p.lower[i] - x[i]);
    r = std::max(r, x[i] - p.upper[i]);
  }
  for (const auto& b : p.balls) {
    r = std::max(r, b.value(x));
  }
  return r;
}

namespace {

// a^T x <= rhs, stored sparsely.
struct LinearRow {
  std::vector<int> index;
  std::vector<double> value;
  double rhs = 0.0;
};

// ||F x + g||^2 + a^T x <= rhs
struct QuadraticRow {
  Eigen::MatrixXd F;
  Eigen::VectorXd g;
  Eigen::VectorXd a;  // empty when absent
  double rhs = 0.0;
  Eigen::MatrixXd FtF;
};

struct Problem {
  int n = 0;
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd E;
  Eigen::VectorXd d;
  std::vector<LinearRow> rows;
  std::vector<int> lower_index;
  std::vector<double> lower_value;
  std::vector<int> upper_index;
  std::vector<double> upper_value;
  std::vector<QuadraticRow> quads;

  int m() const {
    return static_cast<int>(rows.size() + lower_index.size() + upper_index.size() + quads.size());
  }
};

Problem internal_form(const ConvexProgram& p) {
  Problem pb;
  pb.n = p.n_vars();
  pb.P = p.P;
  pb.q = p.q;
  pb.E = p.A_eq;
  pb.d = p.b_eq;
  for (Eigen::Index i = 0; i < p.A_in.rows(); ++i) {
    LinearRow row;
    for (Eigen::Index j = 0; j < p.A_in.cols(); ++j) {
      if (p.A_in(i, j) != 0.0) {
        row.index.push_back(static_cast<int>(j));
        row.value.push_back(p.A_in(i, j));
      }
    }
    row.rhs = p.b_in[i];
    pb.rows.push_back(std::move(row));
  }
  for (int j = 0; j < pb.n; ++j) {
    if (std::isfinite(p.lower[j])) {
      pb.lower_index.push_back(j);
      pb.lower_value.push_back(p.lower[j]);
    }
    if (std::isfinite(p.upper[j])) {
      pb.upper_index.push_back(j);
      pb.upper_value.push_back(p.upper[j]);
    }
  }
  for (const auto& b : p.balls) {
    QuadraticRow qr;
    qr.F = b.F;
    qr.g = b.g;
    qr.a = b.a;
    qr.rhs = b.radius * b.radius;
    qr.FtF = b.F.transpose() * b.F;
    pb.quads.push_back(std::move(qr));
  }
  return pb;
}

// Constraint values c(x) <= 0, ordered rows | lower | upper | quads.
Eigen::VectorXd constraint_values(const Problem& pb, const Eigen::VectorXd& x) {
  Eigen::VectorXd c(pb.m());
  int i = 0;
  for (const auto& row : pb.rows) {
    double v = -row.rhs;
    for (std::size_t t = 0; t < row.index.size(); ++t) v += row.value[t] * x[row.index[t]];
    c[i++] = v;
  }
  for (std::size_t t = 0; t < pb.lower_index.size(); ++t) {
    c[i++] = pb.lower_value[t] - x[pb.lower_index[t]];
  }
  for (std::size_t t = 0; t < pb.upper_index.size(); ++t) {
    c[i++] = x[pb.upper_index[t]] - pb.upper_value[t];
  }
  for (const auto& qr : pb.quads) {
    double v = (qr.F * x + qr.g).squaredNorm() - qr.rhs;
    if (qr.a.size() > 0) v += qr.a.dot(x);
    c[i++] = v;
  }
  return c;
}

std::vector<Eigen::VectorXd> quad_gradients(const Problem& pb, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> grads;
  grads.reserve(pb.quads.size());
  for (const auto& qr : pb.quads) {
    Eigen::VectorXd gr = 2.0 * qr.F.transpose() * (qr.F * x + qr.g);
    if (qr.a.size() > 0) gr += qr.a;
    grads.push_back(std::move(gr));
  }
  return grads;
}

// J v
Eigen::VectorXd jacobian_times(const Problem& pb, const std::vector<Eigen::VectorXd>& qgrad,
                               const Eigen::VectorXd& v) {
  Eigen::VectorXd out(pb.m());
  int i = 0;
  for (const auto& row : pb.rows) {
    double s = 0.0;
    for (std::size_t t = 0; t < row.index.size(); ++t) s += row.value[t] * v[row.index[t]];
    out[i++] = s;
  }
  for (int j : pb.lower_index) out[i++] = -v[j];
  for (int j : pb.upper_index) out[i++] = v[j];
  for (const auto& gr : qgrad) out[i++] = gr.dot(v);
  return out;
}

// J^T w
Eigen::VectorXd jacobian_transpose_times(const Problem& pb,
                                         const std::vector<Eigen::VectorXd>& qgrad,
                                         const Eigen::VectorXd& w) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(pb.n);
  int i = 0;
  for (const auto& row : pb.rows) {
    const double wi = w[i++];
    for (std::size_t t = 0; t < row.index.size(); ++t) out[row.index[t]] += row.value[t] * wi;
  }
  for (int j : pb.lower_index) out[j] -= w[i++];
  for (int j : pb.upper_index) out[j] += w[i++];
  for (const auto& gr : qgrad) out += w[i++] * gr;
  return out;
}

struct Tolerances {
  double primal;
  double dual;
  double gap;
};

struct IpmOutcome {
  bool converged = false;
  Eigen::VectorXd x;
  int iterations = 0;
};

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

IpmOutcome interior_point(const Problem& pb, Eigen::VectorXd x, const Tolerances& tol,
                          int max_iter) {
  const int n = pb.n;
  const int m = pb.m();
  const int me = static_cast<int>(pb.E.rows());

  // Start inside any two-sided bounds.
  {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -kInf);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, kInf);
    for (std::size_t t = 0; t < pb.lower_index.size(); ++t) lo[pb.lower_index[t]] = pb.lower_value[t];
    for (std::size_t t = 0; t < pb.upper_index.size(); ++t) hi[pb.upper_index[t]] = pb.upper_value[t];
    for (int j = 0; j < n; ++j) x[j] = std::clamp(x[j], std::min(lo[j], hi[j]), std::max(lo[j], hi[j]));
  }

  Eigen::VectorXd c = constraint_values(pb, x);
  Eigen::VectorXd s = (-c).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);

  IpmOutcome out;
  out.x = x;
  double best_merit = kInf;

  const double p_scale = 1.0 + (n > 0 ? pb.P.cwiseAbs().maxCoeff() : 0.0);
  for (int iter = 0; iter <= max_iter; ++iter) {
    c = constraint_values(pb, x);
    const auto qgrad = quad_gradients(pb, x);
    Eigen::VectorXd r_d = pb.P * x + pb.q + jacobian_transpose_times(pb, qgrad, z);
    if (me > 0) r_d += pb.E.transpose() * y;
    const Eigen::VectorXd r_e = me > 0 ? Eigen::VectorXd(pb.E * x - pb.d) : Eigen::VectorXd();
    const Eigen::VectorXd r_c = c + s;
    const double mu = m > 0 ? s.dot(z) / m : 0.0;

    const double primal = std::max(inf_norm(r_e), m > 0 ? std::max(0.0, c.maxCoeff()) : 0.0);
    const double dual = inf_norm(r_d);
    const double objective = 0.5 * x.dot(pb.P * x) + pb.q.dot(x);
    const double gap = m * mu;
    const double gap_tol = tol.gap * (1.0 + std::abs(objective));
    const double merit = std::max({primal / tol.primal, dual / tol.dual, gap / gap_tol});
    if (merit < best_merit) {
      best_merit = merit;
      out.x = x;
    }
    out.iterations = iter;
    if (merit <= 1.0) {
      out.converged = true;
      return out;
    }
    if (iter == max_iter || !x.allFinite() || inf_norm(z) > 1e14) break;

    // Condensed Newton matrix K = P + sum z_i hess c_i + J^T W J.
    const Eigen::VectorXd w = z.cwiseQuotient(s);
    Eigen::MatrixXd K = pb.P;
    int i = 0;
    for (const auto& row : pb.rows) {
      const double wi = w[i++];
      for (std::size_t a = 0; a < row.index.size(); ++a) {
        for (std::size_t b = 0; b < row.index.size(); ++b) {
          K(row.index[a], row.index[b]) += wi * row.value[a] * row.value[b];
        }
      }
    }
    for (int j : pb.lower_index) K(j, j) += w[i++];
    for (int j : pb.upper_index) K(j, j) += w[i++];
    for (std::size_t t = 0; t < pb.quads.size(); ++t) {
      const double zi = z[i];
      const double wi = w[i++];
      K.noalias() += (2.0 * zi) * pb.quads[t].FtF;
      K.noalias() += wi * qgrad[t] * qgrad[t].transpose();
    }
    // Regularize on the scale of P only; large barrier weights must not
    // damp the step of unrelated coordinates. Refinement removes the bias.
    Eigen::MatrixXd K_reg = K;
    K_reg.diagonal().array() += 1e-10 * p_scale;
    Eigen::LDLT<Eigen::MatrixXd> kfac_raw(K_reg);
    if (kfac_raw.info() != Eigen::Success) break;
    auto ksolve = [&](const Eigen::MatrixXd& rhs) {
      Eigen::MatrixXd sol = kfac_raw.solve(rhs);
      for (int pass = 0; pass < 2; ++pass) sol += kfac_raw.solve(rhs - K * sol);
      return sol;
    };

    Eigen::MatrixXd KinvEt;
    Eigen::LDLT<Eigen::MatrixXd> sfac;
    if (me > 0) {
      KinvEt = ksolve(pb.E.transpose());
      Eigen::MatrixXd S = pb.E * KinvEt;
      S.diagonal().array() += 1e-13 * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
      sfac.compute(S);
    }

    struct Direction {
      Eigen::VectorXd dx, dy, dz, ds;
    };
    auto newton = [&](const Eigen::VectorXd& r_s) {
      Direction dir;
      const Eigen::VectorXd rhs =
          -r_d - jacobian_transpose_times(pb, qgrad, w.cwiseProduct(r_c) - r_s.cwiseQuotient(s));
      if (me > 0) {
        dir.dy = sfac.solve(pb.E * ksolve(rhs) + r_e);
        dir.dx = ksolve(rhs - pb.E.transpose() * dir.dy);
      } else {
        dir.dy = Eigen::VectorXd();
        dir.dx = ksolve(rhs);
      }
      const Eigen::VectorXd jdx = jacobian_times(pb, qgrad, dir.dx);
      dir.dz = w.cwiseProduct(jdx + r_c) - r_s.cwiseQuotient(s);
      dir.ds = -r_c - jdx;
      return dir;
    };

    double sigma_mu = 0.0;
    Eigen::VectorXd r_s = s.cwiseProduct(z);
    Direction aff = newton(r_s);
    if (m > 0) {
      const double a_aff = std::min(max_step(s, aff.ds), max_step(z, aff.dz));
      const double mu_aff = (s + a_aff * aff.ds).dot(z + a_aff * aff.dz) / m;
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      // Complementarity far below the gap tolerance only inflates z/s and
      // ruins the conditioning of K.
      sigma_mu = std::max(sigma * mu, 1e-2 * gap_tol / m);
      r_s += aff.ds.cwiseProduct(aff.dz) - Eigen::VectorXd::Constant(m, sigma_mu);
    }
    // Longest step that keeps the iterate in a wide neighbourhood of the
    // central path; without the neighbourhood Mehrotra steps can cycle.
    auto step_length = [&](const Direction& d) {
      if (m == 0) return 1.0;
      const double tau = std::max(0.99, 1.0 - mu);
      double alpha = std::min(1.0, tau * std::min(max_step(s, d.ds), max_step(z, d.dz)));
      for (int back = 0; back < 30; ++back) {
        const Eigen::VectorXd sz = (s + alpha * d.ds).cwiseProduct(z + alpha * d.dz);
        if (sz.minCoeff() >= 1e-3 * sz.mean()) break;
        alpha *= 0.8;
      }
      return alpha;
    };
    Direction dir = m > 0 ? newton(r_s) : aff;
    double alpha = step_length(dir);
    if (m > 0 && alpha < 0.1) {
      // Over-aggressive corrector; fall back to a plainly centred step.
      const Direction safe = newton(s.cwiseProduct(z) - Eigen::VectorXd::Constant(m, 0.5 * mu));
      const double alpha_safe = step_length(safe);
      if (alpha_safe > alpha) {
        dir = safe;
        alpha = alpha_safe;
      }
    }
    x += alpha * dir.dx;
    s += alpha * dir.ds;
    z += alpha * dir.dz;
    if (me > 0) y += alpha * dir.dy;
    // Guard against slacks collapsing to exactly zero through rounding.
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
  }
  return out;
}

// min t  s.t. every inequality relaxed by t, equalities kept, t >= -1.
Problem phase_one(const Problem& pb) {
  Problem ph;
  ph.n = pb.n + 1;
  const int t = pb.n;
  ph.P = Eigen::MatrixXd::Zero(ph.n, ph.n);
  ph.q = Eigen::VectorXd::Zero(ph.n);
  ph.q[t] = 1.0;
  ph.E = Eigen::MatrixXd::Zero(pb.E.rows(), ph.n);
  ph.E.leftCols(pb.n) = pb.E;
  ph.d = pb.d;
  for (auto row : pb.rows) {
    row.index.push_back(t);
    row.value.push_back(-1.0);
    ph.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < pb.lower_index.size(); ++i) {
    ph.rows.push_back(LinearRow{{pb.lower_index[i], t}, {-1.0, -1.0}, -pb.lower_value[i]});
  }
  for (std::size_t i = 0; i < pb.upper_index.size(); ++i) {
    ph.rows.push_back(LinearRow{{pb.upper_index[i], t}, {1.0, -1.0}, pb.upper_value[i]});
  }
  for (const auto& qr : pb.quads) {
    QuadraticRow r;
    r.F = Eigen::MatrixXd::Zero(qr.F.rows(), ph.n);
    r.F.leftCols(pb.n) = qr.F;
    r.g = qr.g;
    r.a = Eigen::VectorXd::Zero(ph.n);
    if (qr.a.size() > 0) r.a.head(pb.n) = qr.a;
    r.a[t] = -1.0;
    r.rhs = qr.rhs;
    r.FtF = r.F.transpose() * r.F;
    ph.quads.push_back(std::move(r));
  }
  ph.lower_index.push_back(t);
  ph.lower_value.push_back(-1.0);
  return ph;
}

}  // namespace

SolveResult solve(const ConvexProgram& p, const SolverSettings& settings) {
  p.validate();
  const int n = p.n_vars();
  Problem pb = internal_form(p);
  // Work on a cost scaled to unit size; a huge linear term otherwise drives
  // the first Newton steps far outside the feasible region.
  const double cost_scale =
      1.0 / std::max({1.0, inf_norm(pb.q), n > 0 ? pb.P.cwiseAbs().maxCoeff() : 0.0});
  pb.P *= cost_scale;
  pb.q *= cost_scale;

  SolveResult result;
  auto finish = [&](SolveStatus status, Eigen::VectorXd x, int iterations) {
    result.status = status;
    result.x = std::move(x);
    result.objective = p.objective(result.x);
    result.primal_residual = primal_residual(p, result.x);
    result.iterations = iterations;
    return result;
  };

  Eigen::VectorXd x0 = p.initial_point.size() == n ? p.initial_point : Eigen::VectorXd::Zero(n);

  // Inconsistent equalities cannot be repaired by any interior iteration.
  if (pb.E.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(pb.E);
    const Eigen::VectorXd x_ls = cod.solve(pb.d);
    if (inf_norm(pb.E * x_ls - pb.d) > settings.feas_tol) {
      return finish(SolveStatus::Infeasible, x_ls, 0);
    }
  }

  const double q_scale = 1.0 + inf_norm(pb.q) + (n > 0 ? pb.P.cwiseAbs().maxCoeff() : 0.0);
  const Tolerances tol{1e-2 * settings.feas_tol, 1e-2 * settings.opt_tol * q_scale,
                       1e-3 * settings.opt_tol};
  const int budget = std::max(0, std::min(settings.max_iter, 300));
  IpmOutcome main = interior_point(pb, x0, tol, budget);
  if (main.converged) {
    const double residual = primal_residual(p, main.x);
    if (residual <= settings.feas_tol) {
      return finish(SolveStatus::Optimal, main.x, main.iterations);
    }
  }

  // Decide feasibility from the best iterate.
  const Problem ph = phase_one(pb);
  Eigen::VectorXd xt(n + 1);
  xt.head(n) = main.x;
  const Eigen::VectorXd c0 = constraint_values(pb, main.x);
  xt[n] = (pb.m() > 0 ? std::max(c0.maxCoeff(), -1.0) : -1.0) + 1.0;
  const Tolerances ph_tol{1e-2 * settings.feas_tol, 1e-3 * settings.opt_tol,
                          1e-3 * settings.feas_tol};
  IpmOutcome ph_out = interior_point(ph, xt, ph_tol, 300);
  const int iterations = main.iterations + ph_out.iterations;
  if (ph_out.converged && ph_out.x[n] > settings.feas_tol) {
    return finish(SolveStatus::Infeasible, ph_out.x.head(n), iterations);
  }
  return finish(SolveStatus::MaxIter, main.x, iterations);
}

void dump_program(const ConvexProgram& p, std::ostream& out) {
  using nlohmann::json;
  auto matrix = [](const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vector = [](const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      // JSON has no infinity; unbounded entries become null.
      if (std::isfinite(v[i])) {
        arr.push_back(v[i]);
      } else {
        arr.push_back(nullptr);
      }
    }
    return arr;
  };
  json balls = json::array();
  for (const auto& b : p.balls) {
    json ball{{"F", matrix(b.F)}, {"g", vector(b.g)}, {"radius", b.radius}};
    if (b.a.size() > 0) ball["a"] = vector(b.a);
    balls.push_back(std::move(ball));
  }
  json doc = {{"version", "firefly-program-v1"},
              {"n_vars", p.n_vars()},
              {"P", matrix(p.P)},
              {"q", vector(p.q)},
              {"A_eq", matrix(p.A_eq)},
              {"b_eq", vector(p.b_eq)},
              {"A_in", matrix(p.A_in)},
              {"b_in", vector(p.b_in)},
              {"lower", vector(p.lower)},
              {"upper", vector(p.upper)},
              {"balls", balls}};
  out << doc.dump(2) << "\n";
}

}  // namespace firefly
