#include "locoforge/control.hpp"

namespace locoforge {

Vec4 pd_torques(const PDGains& gains, const Action& action, const RobotState& state) {
  const Vec4 raw = gains.kp.cwiseProduct(action.q_des - state.joints()) -
                   gains.kd.cwiseProduct(state.joint_velocities());
  return raw.cwiseMax(-gains.torque_limit).cwiseMin(gains.torque_limit);
}

}  // namespace locoforge
