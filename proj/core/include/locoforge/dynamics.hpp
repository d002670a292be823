#pragma once

#include <array>
#include <utility>

#include "locoforge/types.hpp"

namespace locoforge {

struct FootKinematics {
  Vec2 position = Vec2::Zero();  // world
  Vec2 velocity = Vec2::Zero();  // world
  Mat2 jacobian = Mat2::Zero();  // d(position)/d(leg joints), world frame
};

FootKinematics foot_kinematics(const PlanarModel& model, const RobotState& state,
                               Foot foot);

// World position of the knee of one leg.
Vec2 knee_position(const PlanarModel& model, const RobotState& state, Foot foot);

// World positions of the four base-box corners.
std::array<Vec2, 4> base_corners(const PlanarModel& model, const RobotState& state);

// Foot position jacobian with respect to all 7 generalized coordinates.
Eigen::Matrix<double, 2, 7> foot_jacobian_full(const PlanarModel& model,
                                               const RobotState& state, Foot foot);

ContactReport contact_forces(const PlanarModel& model, const RobotState& state,
                             const GroundModel& ground);

// Contact forces plus the anchors the next state should carry.
std::pair<ContactReport, std::array<ContactAnchor, kNumFeet>> contact_forces_and_anchors(
    const PlanarModel& model, const RobotState& state, const GroundModel& ground);

// Joint-space inertia matrix via the composite-rigid-body algorithm.
Mat7 mass_matrix(const PlanarModel& model, const RobotState& state);

// Coriolis, centrifugal and gravity bias via recursive Newton-Euler with
// zero joint acceleration.
Vec7 bias_forces(const PlanarModel& model, const RobotState& state);

// Solves M(q) a = tau_gen - h(q, v) + J^T F_contact. Joint torques are the
// four actuated joints; base coordinates are unactuated. Soft joint-stop
// torques are added internally. Throws std::runtime_error if M is
// numerically singular.
Vec7 forward_dynamics(const PlanarModel& model, const RobotState& state,
                      const Vec4& joint_torques, const GroundModel& ground,
                      const BaseWrench& external = {});

// Velocity-Verlet (kick-drift-kick) step at fixed dt. Exact for ballistic
// flight, symplectic for the stiff contact springs. Deterministic: identical
// inputs give bitwise identical output. Throws std::runtime_error if the
// state exceeds the sanity bound.
RobotState step(const PlanarModel& model, const RobotState& state,
                const Vec4& joint_torques, const GroundModel& ground, double dt,
                const BaseWrench& external = {},
                double sanity_bound = 1.0e6);

// Kinetic + gravitational + contact-spring energy, for conservation checks.
double total_energy(const PlanarModel& model, const RobotState& state,
                    const GroundModel& ground);

}  // namespace locoforge
