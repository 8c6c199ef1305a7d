#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace firefly {

/// ||F x + g||^2 + a^T x <= radius^2, `a` empty when absent.
struct BallConstraint {
  Eigen::MatrixXd F;
  Eigen::VectorXd g;
  double radius = 0.0;
  Eigen::VectorXd a;

  double value(const Eigen::VectorXd& x) const;  // left side minus radius^2
};

/// minimize    1/2 x^T P x + q^T x
/// subject to  A_eq x  = b_eq
///             A_in x <= b_in
///             lower <= x <= upper       (infinite entries are ignored)
///             ||F_i x + g_i||^2 + a_i^T x <= r_i^2
struct ConvexProgram {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<BallConstraint> balls;
  Eigen::VectorXd initial_point;  // optional hint, empty when absent

  ConvexProgram() = default;
  explicit ConvexProgram(int n_vars);

  int n_vars() const { return static_cast<int>(q.size()); }

  void add_equality(const Eigen::RowVectorXd& row, double rhs);
  void add_inequality(const Eigen::RowVectorXd& row, double rhs);
  void add_ball(Eigen::MatrixXd F, Eigen::VectorXd g, double radius,
                Eigen::VectorXd a = Eigen::VectorXd());

  double objective(const Eigen::VectorXd& x) const;

  /// Throws std::invalid_argument for inconsistent dimensions, a
  /// non-symmetric or indefinite P, or NaN data.
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };

std::string_view to_string(SolveStatus status);

struct SolverSettings {
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
  int max_iter = 20000;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd x;
  double objective = 0.0;
  double primal_residual = 0.0;
  int iterations = 0;
};

/// Largest violation of any constraint of `p` at `x` (balls measured on
/// the squared form).
double primal_residual(const ConvexProgram& p, const Eigen::VectorXd& x);

/// Primal-dual interior point method with Mehrotra correction. If the main
/// solve does not converge a phase-one program decides between Infeasible
/// and MaxIter. Single-threaded and deterministic.
SolveResult solve(const ConvexProgram& p, const SolverSettings& settings = {});

/// Writes the program as a JSON document for offline inspection.
void dump_program(const ConvexProgram& p, std::ostream& out);

}  // namespace firefly
