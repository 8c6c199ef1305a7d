#include "firefly/fairness.hpp"

#include <cmath>
#include <string>

namespace firefly {

TeamPlan TeamPlan::zeros(const std::vector<int>& horizons) {
  TeamPlan plan;
  for (int h : horizons) plan.inputs.push_back(Eigen::VectorXd::Zero(3 * h));
  return plan;
}

Eigen::VectorXd TeamPlan::flattened() const {
  Eigen::Index total = 0;
  for (const auto& u : inputs) total += u.size();
  Eigen::VectorXd flat(total);
  Eigen::Index offset = 0;
  for (const auto& u : inputs) {
    flat.segment(offset, u.size()) = u;
    offset += u.size();
  }
  return flat;
}

double TeamPlan::distance(const TeamPlan& other) const {
  if (other.inputs.size() != inputs.size()) {
    throw FairnessError("plans have different team sizes");
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != other.inputs[k].size()) {
      throw FairnessError("plans have different horizons");
    }
    sq += (inputs[k] - other.inputs[k]).squaredNorm();
  }
  return std::sqrt(sq);
}

std::string_view to_string(FairnessKind kind) {
  switch (kind) {
    case FairnessKind::F1: return "f1";
    case FairnessKind::F2: return "f2";
    case FairnessKind::F3: return "f3";
    case FairnessKind::F4: return "f4";
  }
  return "?";
}

FairnessKind fairness_kind_from_string(std::string_view name) {
  if (name == "f1") return FairnessKind::F1;
  if (name == "f2") return FairnessKind::F2;
  if (name == "f3") return FairnessKind::F3;
  if (name == "f4") return FairnessKind::F4;
  throw FairnessError("unknown fairness notion '" + std::string(name) + "'");
}

void FairnessNotion::validate() const {
  if (!(beta >= 0.0)) throw FairnessError("beta must be non-negative");
  if (!(surge_threshold >= 0.0)) throw FairnessError("surge threshold M must be non-negative");
  for (double q : q_weights) {
    if (!(q > 0.0)) throw FairnessError("Q weights must be positive");
  }
}

namespace {

void check_baseline(const TeamPlan& plan, const SoloBaseline& baseline) {
  if (static_cast<int>(baseline.energies.size()) != plan.robot_count()) {
    throw FairnessError("invalid baseline: one solo energy per robot required");
  }
  for (double e : baseline.energies) {
    if (!(e > 0.0)) throw FairnessError("invalid baseline: solo energies must be positive");
  }
}

void check_team(const TeamPlan& plan) {
  if (plan.robot_count() < 2) {
    throw FairnessError("fairness is undefined for fewer than two robots");
  }
}

bool uses_energy_term(FairnessKind kind) {
  return kind == FairnessKind::F2 || kind == FairnessKind::F4;
}

bool uses_surge(FairnessKind kind) {
  return kind == FairnessKind::F3 || kind == FairnessKind::F4;
}

double sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

// d phi / d delta
double surge_slope(double delta, double threshold, bool hinge) {
  if (hinge && std::abs(delta) <= threshold) return 0.0;
  return sign(delta);
}

}  // namespace

Eigen::VectorXd normalized_energy(const TeamPlan& plan, const SoloBaseline& baseline) {
  check_baseline(plan, baseline);
  Eigen::VectorXd e(plan.robot_count());
  for (int k = 0; k < plan.robot_count(); ++k) {
    e[k] = plan.inputs[k].squaredNorm() / baseline.energies[k];
  }
  return e;
}

Eigen::VectorXd step_energy(const TeamPlan& plan, const SoloBaseline& baseline, int k) {
  check_baseline(plan, baseline);
  const int h = plan.horizon(k);
  Eigen::VectorXd e(h);
  for (int t = 0; t < h; ++t) e[t] = plan.input(k, t).squaredNorm() / baseline.energies[k];
  return e;
}

Eigen::VectorXd surge_totals(const TeamPlan& plan, const SoloBaseline& baseline,
                             double threshold, bool hinge) {
  check_baseline(plan, baseline);
  Eigen::VectorXd z(plan.robot_count());
  for (int k = 0; k < plan.robot_count(); ++k) {
    const Eigen::VectorXd e = step_energy(plan, baseline, k);
    double total = 0.0;
    double previous = 0.0;
    for (Eigen::Index t = 0; t < e.size(); ++t) {
      const double term = std::abs(e[t] - previous) - threshold;
      total += hinge ? std::max(0.0, term) : term;
      previous = e[t];
    }
    z[k] = total;
  }
  return z;
}

double population_variance(const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(x.size());
}

double energy_term(const TeamPlan& plan, double beta, const std::vector<double>& q_weights) {
  double total = 0.0;
  for (int k = 0; k < plan.robot_count(); ++k) {
    const double q = q_weights.empty() ? 1.0 : q_weights[k];
    total += q * plan.inputs[k].squaredNorm();
  }
  return beta * total;
}

double f1(const TeamPlan& plan, const SoloBaseline& baseline) {
  check_team(plan);
  return population_variance(normalized_energy(plan, baseline));
}

double f2(const TeamPlan& plan, const SoloBaseline& baseline, double beta,
          const std::vector<double>& q_weights) {
  return f1(plan, baseline) + energy_term(plan, beta, q_weights);
}

double f3(const TeamPlan& plan, const SoloBaseline& baseline, double threshold, bool hinge) {
  check_team(plan);
  return population_variance(surge_totals(plan, baseline, threshold, hinge));
}

double f4(const TeamPlan& plan, const SoloBaseline& baseline, double threshold, double beta,
          const std::vector<double>& q_weights, bool hinge) {
  return f3(plan, baseline, threshold, hinge) + energy_term(plan, beta, q_weights);
}

double evaluate(const FairnessNotion& notion, const TeamPlan& plan,
                const SoloBaseline& baseline) {
  switch (notion.kind) {
    case FairnessKind::F1: return f1(plan, baseline);
    case FairnessKind::F2: return f2(plan, baseline, notion.beta, notion.q_weights);
    case FairnessKind::F3:
      return f3(plan, baseline, notion.surge_threshold, notion.surge_hinge);
    case FairnessKind::F4:
      return f4(plan, baseline, notion.surge_threshold, notion.beta, notion.q_weights,
                notion.surge_hinge);
  }
  return 0.0;
}

Eigen::VectorXd gradient(const FairnessNotion& notion, const TeamPlan& plan,
                         const SoloBaseline& baseline, int k) {
  check_baseline(plan, baseline);
  const int n = plan.robot_count();
  const Eigen::VectorXd& uk = plan.inputs[k];
  const double ebar = baseline.energies[k];
  Eigen::VectorXd g = Eigen::VectorXd::Zero(uk.size());

  if (n >= 2 && !uses_surge(notion.kind)) {
    // d Var(e) / d e_k = (2/N)(e_k - mean); d e_k / d u_k = 2 u_k / ebar_k.
    const Eigen::VectorXd e = normalized_energy(plan, baseline);
    const double weight = 2.0 / n * (e[k] - e.mean());
    g += weight * (2.0 / ebar) * uk;
  }
  if (n >= 2 && uses_surge(notion.kind)) {
    const Eigen::VectorXd z =
        surge_totals(plan, baseline, notion.surge_threshold, notion.surge_hinge);
    const double weight = 2.0 / n * (z[k] - z.mean());
    const Eigen::VectorXd e = step_energy(plan, baseline, k);
    const Eigen::Index h = e.size();
    for (Eigen::Index t = 0; t < h; ++t) {
      const double before = t > 0 ? e[t - 1] : 0.0;
      double dz_de = surge_slope(e[t] - before, notion.surge_threshold, notion.surge_hinge);
      if (t + 1 < h) {
        dz_de -= surge_slope(e[t + 1] - e[t], notion.surge_threshold, notion.surge_hinge);
      }
      g.segment<3>(3 * t) += weight * dz_de * (2.0 / ebar) * uk.segment<3>(3 * t);
    }
  }
  if (uses_energy_term(notion.kind)) {
    g += 2.0 * notion.beta * notion.q_weight(k) * uk;
  }
  return g;
}

}  // namespace firefly
