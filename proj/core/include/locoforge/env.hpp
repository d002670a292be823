#pragma once

#include <optional>
#include <string>
#include <vector>

#include "locoforge/dynamics.hpp"
#include "locoforge/rewards.hpp"
#include "locoforge/rng.hpp"

namespace locoforge {

struct EnvConfig {
  Task task = Task::Hopping;
  int stage = 1;
  double control_dt = 0.01;  // s
  int substeps = 10;         // physics steps per control step
  int max_steps = 500;
  double tilt_limit = 0.5;   // rad; bounding default 1.2

  // stage-2 initialization ranges
  double init_height_lo = 0.16;      // m, absolute base height
  double init_height_hi = 0.46;      // m
  double init_tilt = 0.2;            // rad, uniform +-; bounding default 0.9
  double init_joint_perturb = 0.3;   // rad, uniform +- around the demo mean

  // environment randomization (stage 2)
  double ground_height_lo = -0.05;   // m
  double ground_height_hi = 0.05;    // m
  double friction_lo = 0.5;
  double friction_hi = 1.0;

  void validate() const;
  static EnvConfig defaults_for(Task task, int stage);
};

// Fixed per-channel normalization. Channel order: hopping
// [z, dz, q(4), dq(4)]; bounding appends [pitch, dpitch].
struct ObservationScales {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  static ObservationScales defaults_for(Task task);
  Eigen::VectorXd normalize(const Eigen::VectorXd& raw) const {
    return (raw - offset).cwiseQuotient(scale);
  }
  Eigen::VectorXd denormalize(const Eigen::VectorXd& obs) const {
    return obs.cwiseProduct(scale) + offset;
  }
};

int observation_dim(Task task);

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool terminated = false;  // failure state
  bool truncated = false;   // time limit
  RewardBreakdown breakdown;
  ContactReport contact;
  Vec4 torque = Vec4::Zero();
  Action applied_action;  // after clamping to the joint box
};

// One row per control step; row 0 holds the initial state.
struct TraceRow {
  double t = 0.0;
  RobotState state;
  Action action;
  Vec4 torque = Vec4::Zero();
  RewardBreakdown breakdown;
  std::array<bool, kNumFeet> contact_flags{};
  std::array<Vec2, kNumFeet> contact_forces{};
  int demo_index = 0;
};

class Env {
 public:
  Env(PlanarModel model, PDGains gains, GroundModel nominal_ground,
      RewardWeights weights, DemoTrajectory demo, EnvConfig config);

  Eigen::VectorXd reset(RandomEngine& rng);
  // Stage-2-style pose randomization on a caller-pinned ground (sweeps).
  Eigen::VectorXd reset_with_ground(RandomEngine& rng, const GroundModel& ground);
  // Deterministic reset to an explicit state (drop tests and replays).
  Eigen::VectorXd reset_to(const RobotState& state, const GroundModel& ground);

  // Throws std::logic_error if called on a terminated episode without reset.
  StepResult step(const Action& action);

  Eigen::VectorXd observe() const;

  int obs_dim() const { return observation_dim(config_.task); }
  const RobotState& state() const { return state_; }
  const GroundModel& ground() const { return ground_; }
  const GroundModel& nominal_ground() const { return nominal_ground_; }
  const EnvConfig& config() const { return config_; }
  const DemoTrajectory& demo() const { return demo_; }
  const PlanarModel& model() const { return model_; }
  const PDGains& gains() const { return gains_; }
  const RewardWeights& weights() const { return weights_; }
  const ObservationScales& scales() const { return scales_; }
  int episode_steps() const { return episode_steps_; }
  int demo_start_index() const { return demo_start_index_; }
  bool done() const { return terminated_ || truncated_; }

  void set_trace_enabled(bool enabled) { trace_enabled_ = enabled; }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  void begin_episode(const RobotState& state, const GroundModel& ground,
                     int demo_index);
  bool try_randomized_pose(RandomEngine& rng, const GroundModel& ground);
  bool fails_termination_check(const RobotState& s) const;
  int tracked_demo_index() const;

  PlanarModel model_;
  PDGains gains_;
  GroundModel nominal_ground_;
  RewardWeights weights_;
  DemoTrajectory demo_;
  EnvConfig config_;
  ObservationScales scales_;
  int demo_steps_per_control_ = 1;

  RobotState state_;
  GroundModel ground_;
  int episode_steps_ = 0;
  int demo_start_index_ = 0;
  Vec4 prev_torque_ = Vec4::Zero();
  bool has_prev_torque_ = false;
  bool terminated_ = false;
  bool truncated_ = false;
  bool needs_reset_ = true;

  bool trace_enabled_ = false;
  std::vector<TraceRow> trace_;
};

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace locoforge
