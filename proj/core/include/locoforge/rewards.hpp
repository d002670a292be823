#pragma once

#include <array>

#include "locoforge/control.hpp"
#include "locoforge/demo.hpp"
#include "locoforge/types.hpp"

namespace locoforge {

// Weight and scale constants for every reward term. Array entries map to the
// 1-based symbol numbering used in configs and logs: k_ti[0] is k_ti1, odd
// symbols (k_ti1, k_ti3, ...) are weights, even ones scales. k_ps uses the
// hopping numbering; the bounding posture term reads pairs 1-6 and 9-10.
struct RewardWeights {
  double k_tt = 0.05;

  // tracking pairs: base pos, base vel, orientation, angular vel, joints, joint
  // vels; velocity terms weighted up so a parked policy scores far below a
  // moving one
  std::array<double, 12> k_ti{1.2, 15.0, 2.0, 2.5, 0.1, 3.0,
                              0.1, 0.5, 1.2, 4.0, 0.6, 0.8};

  double k_hp = 25.0;
  double z_base_min = 0.30;  // m, above the straight-leg standing reach
  double z_base_max = 0.45;  // m

  // posture pairs: x, y, theta_x, theta_y, theta_z
  std::array<double, 10> k_ps{2.0, 100.0, 0.25, 1.0, 0.25, 1.0, 2.0, 100.0, 0.25, 1.0};

  double k_ct = 0.01;
  double foot_force_limit = 60.0;  // N

  double k_ts1 = 0.02;
  double k_ts2 = 0.3;

  double k_bn = 5.0;
  double k_cc = 0.5;

  void validate() const;
};

// Inputs for one reward evaluation. State-dependent terms read the post-step
// state; r_tt compares the commanded position against the post-step joints.
struct StepContext {
  RobotState state;       // before the control step
  RobotState next_state;  // after the control step
  Action action;
  Vec4 torque = Vec4::Zero();       // tau(t)
  Vec4 prev_torque = Vec4::Zero();  // tau(t-1); equals torque on the first step
  ContactReport contact;            // evaluated at next_state
  const DemoTrajectory* demo = nullptr;
  int demo_index = 0;  // tracked demo frame for stage-1 contexts
};

double r_tt(const StepContext& ctx, const RewardWeights& w);
double r_ti(const StepContext& ctx, const RewardWeights& w);
double r_hp(const StepContext& ctx, const RewardWeights& w);
double r_ps_hopping(const StepContext& ctx, const RewardWeights& w);
double r_ps_bounding(const StepContext& ctx, const RewardWeights& w);
double r_ct(const StepContext& ctx, const RewardWeights& w);
double r_ts(const StepContext& ctx, const RewardWeights& w);
double r_bn(const StepContext& ctx, const RewardWeights& w);
double r_cc(const StepContext& ctx, const RewardWeights& w);

double stage1_reward(const StepContext& ctx, const RewardWeights& w);
double stage2_hopping_reward(const StepContext& ctx, const RewardWeights& w);
double stage2_bounding_reward(const StepContext& ctx, const RewardWeights& w);

// Per-term values for logs and the replay oracle; unused terms stay zero.
struct RewardBreakdown {
  double tt = 0.0, ti = 0.0, hp = 0.0, ps = 0.0, ct = 0.0, ts = 0.0, bn = 0.0,
         cc = 0.0;
  double total = 0.0;
};

RewardBreakdown reward_breakdown(const StepContext& ctx, const RewardWeights& w,
                                 Task task, int stage);

}  // namespace locoforge
