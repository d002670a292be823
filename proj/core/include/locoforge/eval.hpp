#pragma once

#include <string>
#include <vector>

#include "locoforge/env.hpp"
#include "locoforge/policy.hpp"

namespace locoforge {

// Torque-based per-foot contact force estimate, F = -(J^T)^{-1} tau_leg,
// expressed as the force the ground exerts on the foot. Throws
// std::runtime_error naming the leg when its jacobian is singular
// (straight-knee configuration).
std::array<Vec2, kNumFeet> estimate_contact_force(const PlanarModel& model,
                                                  const RobotState& state,
                                                  const Vec4& joint_torques,
                                                  double det_threshold = 1e-6);

struct DropTestSpec {
  std::vector<double> conditions;  // initial heights (m) or pitch angles (rad)
  int horizon = 1000;              // control steps per rollout
  std::uint64_t seed = 0;
  double apex_tolerance = 0.01;    // m for hopping, rad for bounding
};

struct CycleMetrics {
  std::vector<double> peaks;    // hop apex heights or pitch maxima
  std::vector<double> troughs;  // pitch minima (bounding only)
  int convergence_index = -1;   // first cycle with all later deltas < tol
  bool converged = false;
  double steady_value = 0.0;      // mean of the settled peaks
  double steady_amplitude = 0.0;  // (peak - trough)/2 for bounding, peak value for hopping
  double peak_force_estimate = 0.0;  // N, torque-based estimate
};

// Convergence bookkeeping over an apex/extremum series: the smallest index i
// such that every later successive difference stays below tolerance. Needs at
// least 3 detected cycles, otherwise flagged non-convergent.
CycleMetrics cycle_metrics_from_series(const std::vector<double>& peaks, double tolerance);

// Full metrics from a recorded trace: apex detection via the vertical (or
// pitch) rate sign change during flight, plus the force-estimate peak.
CycleMetrics cycle_metrics(const std::vector<TraceRow>& trace, Task task,
                           double tolerance, const PlanarModel& model);

struct DropTestResult {
  double condition = 0.0;
  std::vector<TraceRow> trace;
  CycleMetrics metrics;
  bool survived = false;  // no early termination over the horizon
};

// Rolls the deterministic (mean-action) policy from each initial height
// (hopping) or pitch angle (bounding); nominal ground, nominal posture,
// zero velocities. Non-survival is reported in the result, never thrown.
std::vector<DropTestResult> drop_test(const PolicyParams& params,
                                      const DropTestSpec& spec, Env& env);

struct SweepCell {
  double ground_height = 0.0;
  double friction = 0.0;
  int episodes = 0;
  int survived = 0;
  double survival_rate = 0.0;
  double mean_return = 0.0;
};

// Stage-2-style randomized initial poses on a fixed (height, friction) grid.
// Episode seeds depend only on (seed, cell, episode), so two policies swept
// with the same seed see identical initial conditions.
std::vector<SweepCell> robustness_sweep(const PolicyParams& params, Env& env,
                                        const std::vector<double>& ground_heights,
                                        const std::vector<double>& frictions,
                                        int episodes_per_cell, std::uint64_t seed);

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

struct PolicyEvalStats {
  double mean_return = 0.0;
  double mean_episode_length = 0.0;
  RewardBreakdown mean_step_terms;  // per-step means over all steps
  int episodes = 0;
};

// Runs full episodes with env-config resets. Stochastic mode samples actions
// like the trainer; deterministic mode uses the policy mean.
PolicyEvalStats evaluate_policy(const PolicyParams& params, Env& env, int episodes,
                                std::uint64_t seed, bool stochastic);

}  // namespace locoforge
