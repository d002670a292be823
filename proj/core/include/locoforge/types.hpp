#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "locoforge/planar.hpp"

namespace locoforge {

inline constexpr int kNumDof = 7;     // x, z, pitch, FH, FK, BH, BK
inline constexpr int kNumJoints = 4;  // FH, FK, BH, BK
inline constexpr int kNumFeet = 2;    // front, back

using Vec4 = Eigen::Vector4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

enum class Foot { Front = 0, Back = 1 };

// Sagittal-plane quadruped with the left/right leg pairs lumped into one
// front and one back leg. Knee angle 0 means a straight leg; the front
// knee flexes with positive sign, the back knee mirrored with negative.
struct PlanarModel {
  double base_mass = 2.0;        // kg
  double base_inertia = 0.02;    // kg m^2
  double upper_leg_length = 0.125;  // m
  double lower_leg_length = 0.125;  // m
  double upper_leg_mass = 0.15;     // kg (lumped pair)
  double lower_leg_mass = 0.10;     // kg (lumped pair)
  double upper_leg_inertia = 2.0e-4;  // kg m^2 about com
  double lower_leg_inertia = 1.3e-4;  // kg m^2 about com
  Vec2 front_hip_offset{0.10, 0.0};   // m, from base com, base frame
  Vec2 back_hip_offset{-0.10, 0.0};   // m
  double torque_limit = 2.7;     // N m per joint
  double gravity = 9.81;         // m/s^2, downward

  // Soft joint stops: spring-damper torque outside [lo, hi].
  Vec4 joint_lower{-1.6, -2.6, -1.6, -2.6};
  Vec4 joint_upper{1.6, 2.6, 1.6, 2.6};
  double joint_limit_stiffness = 20.0;  // N m / rad
  double joint_limit_damping = 0.5;     // N m s / rad

  // Sample points used for non-foot ground collision checks.
  double base_half_length = 0.15;  // m
  double base_half_height = 0.04;  // m

  double total_mass() const {
    return base_mass + 2.0 * (upper_leg_mass + lower_leg_mass);
  }
  double leg_reach() const { return upper_leg_length + lower_leg_length; }

  void validate() const;
};

// Per-foot tangential contact anchor, carried across steps.
struct ContactAnchor {
  bool active = false;
  double x = 0.0;  // world x of the stiction anchor
};

struct RobotState {
  Vec7 q = Vec7::Zero();  // x, z, pitch, q_FH, q_FK, q_BH, q_BK
  Vec7 v = Vec7::Zero();
  double t = 0.0;
  std::array<ContactAnchor, kNumFeet> anchors{};

  double base_x() const { return q[0]; }
  double base_z() const { return q[1]; }
  double pitch() const { return q[2]; }
  Vec4 joints() const { return q.tail<4>(); }
  Vec4 joint_velocities() const { return v.tail<4>(); }

  bool all_finite() const { return q.allFinite() && v.allFinite() && std::isfinite(t); }
};

struct GroundModel {
  double height = 0.0;            // m, flat plane offset
  double friction_coeff = 1.0;    // Coulomb
  double contact_stiffness = 1.0e4;     // N/m
  double contact_damping = 100.0;       // N s/m
  double tangential_stiffness = 5.0e3;  // N/m

  void validate() const;
};

struct FootContact {
  bool in_contact = false;
  Vec2 force = Vec2::Zero();  // world (f_x, f_z), ground on foot
  double penetration = 0.0;   // m, >= 0
};

struct ContactReport {
  std::array<FootContact, kNumFeet> feet{};

  const FootContact& front() const { return feet[0]; }
  const FootContact& back() const { return feet[1]; }
  double total_force_magnitude() const {
    return feet[0].force.norm() + feet[1].force.norm();
  }
};

// Wrench applied at the base com, world frame: (fx, fz, torque). Used by
// tests and perturbation experiments; zero by default.
struct BaseWrench {
  Vec2 force = Vec2::Zero();
  double torque = 0.0;
};

}  // namespace locoforge
