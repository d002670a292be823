#include "locoforge/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace locoforge {

void RewardWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("RewardWeights: ") + name +
                                  " must be finite and nonnegative");
  };
  check(k_tt, "k_tt");
  for (double v : k_ti) check(v, "k_ti*");
  check(k_hp, "k_hp");
  for (double v : k_ps) check(v, "k_ps*");
  check(k_ct, "k_ct");
  check(foot_force_limit, "foot_force_limit");
  check(k_ts1, "k_ts1");
  check(k_ts2, "k_ts2");
  check(k_bn, "k_bn");
  check(k_cc, "k_cc");
  if (!(z_base_min < z_base_max))
    throw std::invalid_argument("RewardWeights: z_base_min must be < z_base_max");
}

namespace {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace

double r_tt(const StepContext& ctx, const RewardWeights& w) {
  const Vec4 err = ctx.action.q_des - ctx.next_state.joints();
  return -w.k_tt * err.squaredNorm();
}

double r_ti(const StepContext& ctx, const RewardWeights& w) {
  if (!ctx.demo) throw std::invalid_argument("r_ti: demo reference required");
  const DemoFrame& f = ctx.demo->frames.at(ctx.demo_index);
  const RobotState& s = ctx.next_state;

  const double pos_err = std::hypot(f.q[0] - s.q[0], f.q[1] - s.q[1]);
  const double vel_err = std::hypot(f.v[0] - s.v[0], f.v[1] - s.v[1]);
  const double ori_err = std::abs(wrap_angle(f.q[2] - s.q[2]));
  const double ang_err = std::abs(f.v[2] - s.v[2]);
  const double joint_err = (f.q.tail<4>() - s.q.tail<4>()).norm();
  const double joint_vel_err = (f.v.tail<4>() - s.v.tail<4>()).norm();

  return w.k_ti[0] * std::exp(-w.k_ti[1] * pos_err) +
         w.k_ti[2] * std::exp(-w.k_ti[3] * vel_err) +
         w.k_ti[4] * std::exp(-w.k_ti[5] * ori_err) +
         w.k_ti[6] * std::exp(-w.k_ti[7] * ang_err) +
         w.k_ti[8] * std::exp(-w.k_ti[9] * joint_err) +
         w.k_ti[10] * std::exp(-w.k_ti[11] * joint_vel_err);
}

double r_hp(const StepContext& ctx, const RewardWeights& w) {
  const double z = ctx.next_state.base_z();
  return (w.z_base_min < z && z < w.z_base_max) ? w.k_hp * z : 0.0;
}

double r_ps_hopping(const StepContext& ctx, const RewardWeights& w) {
  const double x = ctx.next_state.base_x();
  const double thy = ctx.next_state.pitch();
  // y, theta_x and theta_z vanish identically in the sagittal model, so their
  // terms contribute the full weights.
  return w.k_ps[0] * std::exp(-w.k_ps[1] * x * x) + w.k_ps[2] + w.k_ps[4] +
         w.k_ps[6] * std::exp(-w.k_ps[7] * thy * thy) + w.k_ps[8];
}

double r_ps_bounding(const StepContext& ctx, const RewardWeights& w) {
  const double x = ctx.next_state.base_x();
  return w.k_ps[0] * std::exp(-w.k_ps[1] * x * x) + w.k_ps[2] + w.k_ps[4] + w.k_ps[8];
}

double r_ct(const StepContext& ctx, const RewardWeights& w) {
  const double total = ctx.contact.total_force_magnitude();
  return total > w.foot_force_limit ? -w.k_ct * total : 0.0;
}

double r_ts(const StepContext& ctx, const RewardWeights& w) {
  return -w.k_ts1 * std::exp(w.k_ts2 * (ctx.torque - ctx.prev_torque).norm());
}

double r_bn(const StepContext& ctx, const RewardWeights& w) {
  if (!ctx.demo) throw std::invalid_argument("r_bn: demo reference required");
  return -w.k_bn * nearest_path_distance(*ctx.demo, ctx.next_state.base_z(),
                                         ctx.next_state.pitch());
}

double r_cc(const StepContext& ctx, const RewardWeights& w) {
  const bool front = ctx.contact.front().in_contact;
  const bool back = ctx.contact.back().in_contact;
  return (front && back) ? 0.0 : w.k_cc;
}

double stage1_reward(const StepContext& ctx, const RewardWeights& w) {
  return r_ti(ctx, w) + r_tt(ctx, w);
}

double stage2_hopping_reward(const StepContext& ctx, const RewardWeights& w) {
  return r_hp(ctx, w) + r_ps_hopping(ctx, w) + r_ct(ctx, w) + r_ts(ctx, w) +
         r_tt(ctx, w);
}

double stage2_bounding_reward(const StepContext& ctx, const RewardWeights& w) {
  return r_bn(ctx, w) + r_cc(ctx, w) + r_ps_bounding(ctx, w) + r_ct(ctx, w) +
         r_ts(ctx, w) + r_tt(ctx, w);
}

RewardBreakdown reward_breakdown(const StepContext& ctx, const RewardWeights& w,
                                 Task task, int stage) {
  RewardBreakdown b;
  b.tt = r_tt(ctx, w);
  if (stage == 1) {
    b.ti = r_ti(ctx, w);
    b.total = b.ti + b.tt;
    return b;
  }
  b.ct = r_ct(ctx, w);
  b.ts = r_ts(ctx, w);
  if (task == Task::Hopping) {
    b.hp = r_hp(ctx, w);
    b.ps = r_ps_hopping(ctx, w);
    b.total = b.hp + b.ps + b.ct + b.ts + b.tt;
  } else {
    b.bn = r_bn(ctx, w);
    b.cc = r_cc(ctx, w);
    b.ps = r_ps_bounding(ctx, w);
    b.total = b.bn + b.cc + b.ps + b.ct + b.ts + b.tt;
  }
  return b;
}

}  // namespace locoforge
