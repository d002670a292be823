#pragma once

#include <string>
#include <vector>

#include "locoforge/rng.hpp"
#include "locoforge/types.hpp"

namespace locoforge {

enum class Task { Hopping, Bounding };

std::string task_name(Task task);
Task parse_task(const std::string& name);

struct DemoFrame {
  Vec7 q = Vec7::Zero();  // x, z, th, qfh, qfk, qbh, qbk
  Vec7 v = Vec7::Zero();
};

// State-only demonstration trajectory at uniform dt. Cyclic demos store the
// closing frame, i.e. frames.front() and frames.back() describe the same
// phase point.
struct DemoTrajectory {
  double dt = 0.01;
  Task task = Task::Hopping;
  bool cyclic = true;
  std::vector<DemoFrame> frames;

  // Throws std::runtime_error naming the violated invariant.
  void validate(double closure_tol = 1e-2) const;

  int frame_count() const { return static_cast<int>(frames.size()); }
  // Number of distinct phase steps per cycle (skips the duplicated endpoint).
  int cycle_length() const { return cyclic ? frame_count() - 1 : frame_count(); }
  int wrap_index(long long index) const;

  Vec4 mean_joint_posture() const;
  double mean_base_height() const;
};

// Text format, one frame per line:
//   # locoforge-demo v1
//   task=<hopping|bounding>,dt=<float>,cyclic=<0|1>
//   x,z,th,qfh,qfk,qbh,qbk,vx,vz,vth,dqfh,dqfk,dqbh,dqbk
//   <14 comma-separated floats per line>
DemoTrajectory load_demo(const std::string& path);
void save_demo(const DemoTrajectory& demo, const std::string& path);

// Closed-form two-link leg IK in the base frame. target is the foot position
// relative to the hip; the knee bend branch is +1 for the front leg, -1 for
// the back. Throws std::runtime_error when the target is out of reach.
Vec2 leg_inverse_kinematics(const PlanarModel& model, const Vec2& target,
                            double knee_sign);
double knee_sign(Foot foot);

// One cyclic hop starting at the flight apex: ballistic flight segments
// around a velocity-matched stance compression, joints from IK with feet
// pinned under the hips during stance.
DemoTrajectory synthesize_hop_demo(double apex_height, double stance_depth,
                                   double period, double dt, const PlanarModel& model);

// One cyclic bound: sinusoidal pitch, half-period base-height oscillation,
// alternating front/back stance with swing-foot clearance arcs.
DemoTrajectory synthesize_bound_demo(double pitch_amplitude, double hop_height,
                                     double period, double dt,
                                     const PlanarModel& model);

// Uniform random frame; the returned state copies the frame with t = 0.
std::pair<int, RobotState> sample_demo_point(const DemoTrajectory& demo,
                                             RandomEngine& rng);

// min_i || (z_i - z, th_i - th) ||_2 over all frames, exact linear scan.
double nearest_path_distance(const DemoTrajectory& demo, double z_base,
                             double pitch);

}  // namespace locoforge
