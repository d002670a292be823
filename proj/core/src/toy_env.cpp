#include "locoforge/toy_env.hpp"

#include <algorithm>
#include <cmath>

namespace locoforge {

Eigen::VectorXd PointMassEnv::reset(RandomEngine& rng) {
  position_ = rng.uniform(-1.0, 1.0);
  steps_ = 0;
  Eigen::VectorXd obs(1);
  obs[0] = position_;
  return obs;
}

EnvStepOutcome PointMassEnv::step(const Eigen::VectorXd& action) {
  const double a = std::clamp(action[0], -1.0, 1.0);
  position_ += 0.1 * a;
  ++steps_;

  EnvStepOutcome out;
  out.observation = Eigen::VectorXd(1);
  out.observation[0] = position_;
  out.reward = -std::abs(position_);
  out.truncated = steps_ >= horizon_;
  return out;
}

}  // namespace locoforge
