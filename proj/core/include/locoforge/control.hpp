#pragma once

#include "locoforge/types.hpp"

namespace locoforge {

// Fixed-gain joint position PD. The front/back legs of the planar model each
// lump a left/right pair, so the default gains are twice the per-physical-joint
// values of a Solo-class robot.
struct PDGains {
  Vec4 kp = Vec4::Constant(6.0);   // N m / rad
  Vec4 kd = Vec4::Constant(0.2);   // N m s / rad
  double torque_limit = 2.7;       // N m

  void validate() const {
    if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any())
      throw std::invalid_argument("PDGains: kp, kd must be nonnegative");
    if (torque_limit <= 0.0)
      throw std::invalid_argument("PDGains: torque_limit must be positive");
  }
};

// Desired joint positions, the policy's action space.
struct Action {
  Vec4 q_des = Vec4::Zero();
};

// tau_j = clamp(kp (q_des_j - q_j) - kd qd_j, +-limit); desired velocity zero.
Vec4 pd_torques(const PDGains& gains, const Action& action, const RobotState& state);

}  // namespace locoforge
