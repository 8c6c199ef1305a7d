#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace firefly {

using Vec3 = Eigen::Vector3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Position and velocity of one robot at one time step.
struct RobotState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();

  Vec6 stacked() const;
  static RobotState from_stacked(const Vec6& s);
  bool finite() const;
  bool operator==(const RobotState&) const = default;
};

/// Acceleration command of one robot at one time step.
struct RobotInput {
  Vec3 acceleration = Vec3::Zero();

  bool finite() const;
  bool operator==(const RobotInput&) const = default;
};

/// Discrete-time double integrator with sample time dt.
///
///   A = [I  dt*I]      B = [dt^2/2 * I]
///       [0     I]          [dt     * I]
class DynamicsModel {
 public:
  explicit DynamicsModel(double dt);

  double dt() const { return dt_; }
  const Mat6& A() const { return A_; }
  const Mat63& B() const { return B_; }

  /// Coefficient of u[t] in the position after `steps_after + 1` further
  /// steps, i.e. p[t + 1 + steps_after] gains gain(steps_after) * u[t].
  double position_gain(int steps_after) const;

 private:
  double dt_;
  Mat6 A_;
  Mat63 B_;
};

struct Trajectory {
  std::vector<RobotState> states;  // size H + 1
  std::vector<RobotInput> inputs;  // size H
};

RobotState step(const DynamicsModel& model, const RobotState& s, const RobotInput& u);

Trajectory rollout(const DynamicsModel& model, const RobotState& s0,
                   std::span<const RobotInput> inputs);

/// Largest violation of states[t+1] == A states[t] + B inputs[t].
double dynamic_consistency_error(const DynamicsModel& model, const Trajectory& traj);

}  // namespace firefly
