#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "locoforge/env.hpp"
#include "locoforge/policy.hpp"
#include "locoforge/rollout_env.hpp"

namespace locoforge {

struct PpoConfig {
  double clip_ratio = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch_size = 512;
  int horizon = 256;       // steps per env per update
  int env_count = 16;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double grad_clip = 0.5;
  int total_updates = 300;
  int checkpoint_interval = 50;
  double log_std_init = -1.0;
  std::uint64_t seed = 0;

  int batch_size() const { return horizon * env_count; }
  void validate() const;
};

// Flattened on-policy transitions, env-major: index = env * horizon + t.
struct RolloutBatch {
  Eigen::MatrixXd observations;  // obs_dim x N
  Eigen::MatrixXd actions;       // act_dim x N
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;       // V(s_t)
  Eigen::VectorXd next_values;  // V(s_{t+1}), pre-reset at episode ends
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> done;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return static_cast<int>(rewards.size()); }
  static RolloutBatch allocate(int obs_dim, int act_dim, int n);
};

// Adaptive-moment optimizer over the flat parameter vector.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros(int n);
  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  void save(const std::string& path) const;
  static AdamState load(const std::string& path);
};

// Adapts the locomotion Env to the trainer interface.
class LocomotionRolloutEnv : public RolloutEnv {
 public:
  explicit LocomotionRolloutEnv(Env env) : env_(std::move(env)) {}
  int obs_dim() const override { return env_.obs_dim(); }
  int act_dim() const override { return kNumJoints; }
  Eigen::VectorXd reset(RandomEngine& rng) override { return env_.reset(rng); }
  EnvStepOutcome step(const Eigen::VectorXd& action) override;
  Env& env() { return env_; }

 private:
  Env env_;
};

// Carry-over between collect calls: current observation and episode tallies.
struct RolloutCarry {
  bool has_obs = false;
  Eigen::VectorXd obs;
  double episode_return = 0.0;
  int episode_length = 0;
};

struct CollectStats {
  std::vector<double> episode_returns;
  std::vector<int> episode_lengths;
  RewardBreakdown term_sums;  // summed over all collected steps
  int steps = 0;
};

// Steps every env for `horizon` steps under a frozen parameter snapshot.
// Terminated/truncated episodes reset inline from the per-env rng. With any
// worker count the result is bitwise identical: each env's stream touches
// only its own rng and carry slot.
CollectStats collect_rollouts(std::vector<std::unique_ptr<RolloutEnv>>& envs,
                              const PolicyParams& params, int horizon,
                              std::vector<RandomEngine>& rngs,
                              std::vector<RolloutCarry>& carries,
                              RolloutBatch& batch, int workers = 1);

// delta_t = r_t + gamma V(s_{t+1}) (1 - terminated_t) - V(s_t)
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}; returns = A + V.
// Truncation bootstraps from V(s_{t+1}); termination does not.
void compute_gae(RolloutBatch& batch, double gamma, double lambda, int horizon);

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  bool aborted = false;  // non-finite loss encountered; params unchanged
};

struct PpoLossTerms {
  double policy_loss = 0.0;
  double value_mse = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
};

// Clipped-surrogate loss of one minibatch,
//   -E[min(rho A, clamp(rho, 1-eps, 1+eps) A)] + c_v E[(V - R)^2] - c_e H,
// with the exact parameter gradient accumulated into grads when given.
// Shared by ppo_update and the finite-difference gradient checks.
PpoLossTerms ppo_minibatch_loss(const PolicyParams& params, const Eigen::MatrixXd& obs,
                                const Eigen::MatrixXd& actions,
                                const Eigen::VectorXd& logp_old,
                                const Eigen::VectorXd& advantages,
                                const Eigen::VectorXd& returns, const PpoConfig& config,
                                GradientBuffer* grads);

UpdateDiagnostics ppo_update(PolicyParams& params, AdamState& optimizer,
                             RolloutBatch& batch, const PpoConfig& config,
                             RandomEngine& rng);

struct TrainStageOptions {
  Task task = Task::Hopping;
  int stage = 1;
  PlanarModel model;
  PDGains gains;
  GroundModel ground;
  RewardWeights weights;
  DemoTrajectory demo;
  EnvConfig env_config;
  PpoConfig ppo;
  std::optional<PolicyParams> initial_params;  // required for stage 2
  std::string out_dir;
  int workers = 1;
  bool resume = false;  // continue from the latest checkpoint in out_dir
};

struct TrainResult {
  PolicyParams params;
  std::string final_checkpoint;  // path of the final policy file
  int updates_run = 0;
};

// Fresh stage-1 initialization: random hidden layers, actor output bias at
// the demo's mean joint posture so the initial policy holds a stance.
PolicyParams initial_locomotion_policy(Task task, const DemoTrajectory& demo,
                                       const PpoConfig& config);

// Full loop: collect -> GAE -> update, with CSV logging and periodic
// checkpoints (policy + optimizer + rng states) under out_dir. Environments
// are freshly reset at every checkpoint boundary so a resumed run reproduces
// the straight-through log byte for byte.
TrainResult train_stage(const TrainStageOptions& options);

}  // namespace locoforge
