#include "firefly/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace firefly {

Vec6 RobotState::stacked() const {
  Vec6 s;
  s << position, velocity;
  return s;
}

RobotState RobotState::from_stacked(const Vec6& s) {
  return RobotState{s.head<3>(), s.tail<3>()};
}

bool RobotState::finite() const { return position.allFinite() && velocity.allFinite(); }

bool RobotInput::finite() const { return acceleration.allFinite(); }

DynamicsModel::DynamicsModel(double dt) : dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("sample time must be positive and finite");
  }
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  A_.setIdentity();
  A_.topRightCorner<3, 3>() = dt * I;
  B_.topRows<3>() = 0.5 * dt * dt * I;
  B_.bottomRows<3>() = dt * I;
}

double DynamicsModel::position_gain(int steps_after) const {
  // dt^2/2 from the step itself, then dt^2 per step of coasting on dt*u.
  return dt_ * dt_ * (0.5 + static_cast<double>(steps_after));
}

RobotState step(const DynamicsModel& model, const RobotState& s, const RobotInput& u) {
  const double dt = model.dt();
  RobotState next;
  next.position = s.position + dt * s.velocity + (0.5 * dt * dt) * u.acceleration;
  next.velocity = s.velocity + dt * u.acceleration;
  return next;
}

Trajectory rollout(const DynamicsModel& model, const RobotState& s0,
                   std::span<const RobotInput> inputs) {
  Trajectory traj;
  traj.states.reserve(inputs.size() + 1);
  traj.states.push_back(s0);
  traj.inputs.assign(inputs.begin(), inputs.end());
  for (const auto& u : inputs) {
    traj.states.push_back(step(model, traj.states.back(), u));
  }
  return traj;
}

double dynamic_consistency_error(const DynamicsModel& model, const Trajectory& traj) {
  if (traj.states.size() != traj.inputs.size() + 1) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    const Vec6 predicted = model.A() * traj.states[t].stacked() +
                           model.B() * traj.inputs[t].acceleration;
    worst = std::max(worst, (predicted - traj.states[t + 1].stacked()).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace firefly
