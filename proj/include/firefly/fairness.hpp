#pragma once

#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "firefly/dynamics.hpp"

namespace firefly {

class FairnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input sequences of the whole team. Robot k's sequence is stored flat,
/// three entries per step, so step t lives at segment(3 * t, 3).
struct TeamPlan {
  std::vector<Eigen::VectorXd> inputs;
  int prefix_len = 0;  // steps already executed (fixed)

  static TeamPlan zeros(const std::vector<int>& horizons);

  int robot_count() const { return static_cast<int>(inputs.size()); }
  int horizon(int k) const { return static_cast<int>(inputs[k].size() / 3); }
  Vec3 input(int k, int t) const { return inputs[k].segment<3>(3 * t); }
  void set_input(int k, int t, const Vec3& u) { inputs[k].segment<3>(3 * t) = u; }

  Eigen::VectorXd flattened() const;
  double distance(const TeamPlan& other) const;  // Euclidean, flattened
};

enum class FairnessKind { F1, F2, F3, F4 };

std::string_view to_string(FairnessKind kind);
FairnessKind fairness_kind_from_string(std::string_view name);

struct FairnessNotion {
  FairnessKind kind = FairnessKind::F1;
  double beta = 1e-6;
  // Block-diagonal Q = diag(q_1 I, ..., q_N I); empty means identity.
  std::vector<double> q_weights;
  double surge_threshold = 10.0;  // M
  bool surge_hinge = false;

  void validate() const;
  double q_weight(int k) const { return q_weights.empty() ? 1.0 : q_weights[k]; }
};

/// Solo energies ebar_k; every entry must be positive to normalize.
struct SoloBaseline {
  std::vector<double> energies;
};

Eigen::VectorXd normalized_energy(const TeamPlan& plan, const SoloBaseline& baseline);

/// Per-step normalized energy ||u_k[t]||^2 / ebar_k of robot k.
Eigen::VectorXd step_energy(const TeamPlan& plan, const SoloBaseline& baseline, int k);

/// Total surges z_k = sum_t phi(e_k[t] - e_k[t-1]) with e_k[-1] = 0 and
/// phi(d) = |d| - M, or max(0, |d| - M) in hinge mode.
Eigen::VectorXd surge_totals(const TeamPlan& plan, const SoloBaseline& baseline,
                             double threshold, bool hinge);

/// Population variance (1/N) sum (x_k - mean)^2.
double population_variance(const Eigen::VectorXd& x);

double f1(const TeamPlan& plan, const SoloBaseline& baseline);
double f2(const TeamPlan& plan, const SoloBaseline& baseline, double beta,
          const std::vector<double>& q_weights = {});
double f3(const TeamPlan& plan, const SoloBaseline& baseline, double threshold,
          bool hinge = false);
double f4(const TeamPlan& plan, const SoloBaseline& baseline, double threshold, double beta,
          const std::vector<double>& q_weights = {}, bool hinge = false);

/// beta * u^T Q u over the whole team.
double energy_term(const TeamPlan& plan, double beta, const std::vector<double>& q_weights);

double evaluate(const FairnessNotion& notion, const TeamPlan& plan, const SoloBaseline& baseline);

/// Gradient of the notion with respect to robot k's whole input sequence
/// (3 * H_k entries, prefix included). A one-robot team has a constant
/// variance, so its fairness gradient is the energy term alone. At |.|
/// kinks the zero element of the subdifferential is used.
Eigen::VectorXd gradient(const FairnessNotion& notion, const TeamPlan& plan,
                         const SoloBaseline& baseline, int k);

}  // namespace firefly
