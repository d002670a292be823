#pragma once

#include "locoforge/rollout_env.hpp"

namespace locoforge {

// 1-D point mass moved by a clamped velocity command; reward is the negative
// distance to the origin. Convex learning sanity check for the trainer.
class PointMassEnv : public RolloutEnv {
 public:
  explicit PointMassEnv(int horizon = 50) : horizon_(horizon) {}

  int obs_dim() const override { return 1; }
  int act_dim() const override { return 1; }

  Eigen::VectorXd reset(RandomEngine& rng) override;
  EnvStepOutcome step(const Eigen::VectorXd& action) override;

 private:
  int horizon_;
  double position_ = 0.0;
  int steps_ = 0;
};

}  // namespace locoforge
