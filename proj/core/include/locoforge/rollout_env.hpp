#pragma once

#include <Eigen/Dense>

#include "locoforge/rewards.hpp"
#include "locoforge/rng.hpp"

namespace locoforge {

struct EnvStepOutcome {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  RewardBreakdown breakdown;  // zero for envs without per-term rewards
};

// Minimal surface the trainer steps against; implemented by the locomotion
// env adapter and by the point-mass test env.
class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual Eigen::VectorXd reset(RandomEngine& rng) = 0;
  virtual EnvStepOutcome step(const Eigen::VectorXd& action) = 0;
};

}  // namespace locoforge
