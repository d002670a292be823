#include "locoforge/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace locoforge {

void PlanarModel::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PlanarModel: ") + what);
  };
  require(base_mass > 0.0 && upper_leg_mass > 0.0 && lower_leg_mass > 0.0,
          "masses must be strictly positive");
  require(base_inertia > 0.0 && upper_leg_inertia > 0.0 && lower_leg_inertia > 0.0,
          "inertias must be strictly positive");
  require(upper_leg_length > 0.0 && lower_leg_length > 0.0,
          "link lengths must be strictly positive");
  require(torque_limit > 0.0, "torque_limit must be positive");
  require(gravity >= 0.0, "gravity must be nonnegative");
  for (int j = 0; j < kNumJoints; ++j)
    require(joint_lower[j] <= joint_upper[j], "joint range must be ordered");
}

void GroundModel::validate() const {
  if (friction_coeff < 0.0) throw std::invalid_argument("GroundModel: friction_coeff < 0");
  if (contact_stiffness < 0.0 || contact_damping < 0.0 || tangential_stiffness < 0.0)
    throw std::invalid_argument("GroundModel: stiffness/damping < 0");
}

namespace {

// Kinematic tree: two massless bodies carry the base translation so every
// joint is single-dof and the recursions stay uniform.
//   0 dummy-x (prismatic x), 1 dummy-y (prismatic y), 2 base (revolute),
//   3 front thigh, 4 front shank, 5 back thigh, 6 back shank.
constexpr int kNumBodies = 7;
constexpr int kParent[kNumBodies] = {-1, 0, 1, 2, 3, 2, 5};

struct TreeContext {
  PlanarXform xform[kNumBodies];  // child placement in parent
  Vec3 subspace[kNumBodies];      // joint motion subspace S_i
  Mat3 inertia[kNumBodies];       // body spatial inertia, body frame
};

TreeContext build_tree(const PlanarModel& m, const Vec7& q) {
  TreeContext t;
  t.xform[0] = make_xform(0.0, Vec2(q[0], 0.0));
  t.xform[1] = make_xform(0.0, Vec2(0.0, q[1]));
  t.xform[2] = make_xform(q[2], Vec2::Zero());
  t.xform[3] = make_xform(q[3], m.front_hip_offset);
  t.xform[4] = make_xform(q[4], Vec2(0.0, -m.upper_leg_length));
  t.xform[5] = make_xform(q[5], m.back_hip_offset);
  t.xform[6] = make_xform(q[6], Vec2(0.0, -m.upper_leg_length));

  t.subspace[0] = Vec3(0, 1, 0);
  t.subspace[1] = Vec3(0, 0, 1);
  for (int i = 2; i < kNumBodies; ++i) t.subspace[i] = Vec3(1, 0, 0);

  t.inertia[0].setZero();
  t.inertia[1].setZero();
  t.inertia[2] = spatial_inertia(m.base_mass, m.base_inertia, Vec2::Zero());
  const Mat3 upper = spatial_inertia(m.upper_leg_mass, m.upper_leg_inertia,
                                     Vec2(0.0, -0.5 * m.upper_leg_length));
  const Mat3 lower = spatial_inertia(m.lower_leg_mass, m.lower_leg_inertia,
                                     Vec2(0.0, -0.5 * m.lower_leg_length));
  t.inertia[3] = t.inertia[5] = upper;
  t.inertia[4] = t.inertia[6] = lower;
  return t;
}

struct LegIndices {
  int hip, knee;
  Vec2 hip_offset;
};

LegIndices leg_indices(const PlanarModel& m, Foot foot) {
  if (foot == Foot::Front) return {3, 4, m.front_hip_offset};
  return {5, 6, m.back_hip_offset};
}

Vec4 soft_limit_torques(const PlanarModel& m, const RobotState& s) {
  Vec4 tau = Vec4::Zero();
  for (int j = 0; j < kNumJoints; ++j) {
    const double q = s.q[3 + j];
    const double qd = s.v[3 + j];
    if (q > m.joint_upper[j]) {
      tau[j] = -m.joint_limit_stiffness * (q - m.joint_upper[j]) - m.joint_limit_damping * qd;
    } else if (q < m.joint_lower[j]) {
      tau[j] = -m.joint_limit_stiffness * (q - m.joint_lower[j]) - m.joint_limit_damping * qd;
    }
  }
  return tau;
}

Vec7 acceleration_from(const PlanarModel& model, const RobotState& state,
                       const Vec4& joint_torques, const ContactReport& report,
                       const BaseWrench& external) {
  Vec7 tau_gen = Vec7::Zero();
  tau_gen[0] = external.force.x();
  tau_gen[1] = external.force.y();
  tau_gen[2] = external.torque;
  tau_gen.tail<4>() = joint_torques + soft_limit_torques(model, state);

  for (int i = 0; i < kNumFeet; ++i) {
    const auto& fc = report.feet[i];
    if (!fc.in_contact) continue;
    const auto jac = foot_jacobian_full(model, state, static_cast<Foot>(i));
    tau_gen += jac.transpose() * fc.force;
  }

  const Mat7 M = mass_matrix(model, state);
  const Vec7 rhs = tau_gen - bias_forces(model, state);
  Eigen::LDLT<Mat7> ldlt(M);
  const Vec7 d = ldlt.vectorD();
  if (d.minCoeff() <= 0.0 || d.minCoeff() < 1e-14 * d.maxCoeff())
    throw std::runtime_error("forward_dynamics: mass matrix numerically singular");
  Vec7 a = ldlt.solve(rhs);
  const double residual = (M * a - rhs).norm();
  if (!a.allFinite() || residual > 1e-6 * (1.0 + rhs.norm()))
    throw std::runtime_error("forward_dynamics: mass matrix numerically singular");
  return a;
}

}  // namespace

FootKinematics foot_kinematics(const PlanarModel& model, const RobotState& state,
                               Foot foot) {
  const auto leg = leg_indices(model, foot);
  const double theta = state.q[2];
  const double qh = state.q[leg.hip];
  const double qk = state.q[leg.knee];
  const Vec2 upper(0.0, -model.upper_leg_length);
  const Vec2 lower(0.0, -model.lower_leg_length);

  const Vec2 base(state.q[0], state.q[1]);
  const Vec2 hip = base + rot2(theta) * leg.hip_offset;
  const Vec2 knee = hip + rot2(theta + qh) * upper;
  const Vec2 pos = knee + rot2(theta + qh + qk) * lower;

  const Vec2 d_upper = drot2(theta + qh) * upper;
  const Vec2 d_lower = drot2(theta + qh + qk) * lower;

  FootKinematics out;
  out.position = pos;
  out.jacobian.col(0) = d_upper + d_lower;
  out.jacobian.col(1) = d_lower;

  const double thetad = state.v[2];
  const double qhd = state.v[leg.hip];
  const double qkd = state.v[leg.knee];
  out.velocity = Vec2(state.v[0], state.v[1]) + thetad * (drot2(theta) * leg.hip_offset) +
                 (thetad + qhd) * d_upper + (thetad + qhd + qkd) * d_lower;
  return out;
}

Vec2 knee_position(const PlanarModel& model, const RobotState& state, Foot foot) {
  const auto leg = leg_indices(model, foot);
  const double theta = state.q[2];
  const Vec2 base(state.q[0], state.q[1]);
  const Vec2 hip = base + rot2(theta) * leg.hip_offset;
  return hip + rot2(theta + state.q[leg.hip]) * Vec2(0.0, -model.upper_leg_length);
}

std::array<Vec2, 4> base_corners(const PlanarModel& model, const RobotState& state) {
  const Vec2 base(state.q[0], state.q[1]);
  const Mat2 r = rot2(state.q[2]);
  const double hl = model.base_half_length, hh = model.base_half_height;
  return {base + r * Vec2(hl, hh), base + r * Vec2(hl, -hh),
          base + r * Vec2(-hl, hh), base + r * Vec2(-hl, -hh)};
}

Eigen::Matrix<double, 2, 7> foot_jacobian_full(const PlanarModel& model,
                                               const RobotState& state, Foot foot) {
  const auto leg = leg_indices(model, foot);
  const double theta = state.q[2];
  const double qh = state.q[leg.hip];
  const double qk = state.q[leg.knee];
  const Vec2 upper(0.0, -model.upper_leg_length);
  const Vec2 lower(0.0, -model.lower_leg_length);
  const Vec2 d_upper = drot2(theta + qh) * upper;
  const Vec2 d_lower = drot2(theta + qh + qk) * lower;

  Eigen::Matrix<double, 2, 7> jac = Eigen::Matrix<double, 2, 7>::Zero();
  jac.col(0) = Vec2(1.0, 0.0);
  jac.col(1) = Vec2(0.0, 1.0);
  jac.col(2) = drot2(theta) * leg.hip_offset + d_upper + d_lower;
  jac.col(leg.hip) = d_upper + d_lower;
  jac.col(leg.knee) = d_lower;
  return jac;
}

std::pair<ContactReport, std::array<ContactAnchor, kNumFeet>> contact_forces_and_anchors(
    const PlanarModel& model, const RobotState& state, const GroundModel& ground) {
  ContactReport report;
  std::array<ContactAnchor, kNumFeet> anchors = state.anchors;

  for (int i = 0; i < kNumFeet; ++i) {
    const auto kin = foot_kinematics(model, state, static_cast<Foot>(i));
    const double pen = ground.height - kin.position.y();
    if (pen <= 0.0) {
      anchors[i].active = false;
      continue;
    }
    double fn = ground.contact_stiffness * pen +
                ground.contact_damping * std::max(0.0, -kin.velocity.y());
    fn = std::max(fn, 0.0);

    if (!anchors[i].active) {
      anchors[i].active = true;
      anchors[i].x = kin.position.x();
    }
    double ft = -ground.tangential_stiffness * (kin.position.x() - anchors[i].x);
    const double limit = ground.friction_coeff * fn;
    if (std::abs(ft) > limit) {
      ft = std::clamp(ft, -limit, limit);
      // anchor slips to keep the spring at the cone boundary
      if (ground.tangential_stiffness > 0.0)
        anchors[i].x = kin.position.x() + ft / ground.tangential_stiffness;
    }

    report.feet[i].in_contact = true;
    report.feet[i].force = Vec2(ft, fn);
    report.feet[i].penetration = pen;
  }
  return {report, anchors};
}

ContactReport contact_forces(const PlanarModel& model, const RobotState& state,
                             const GroundModel& ground) {
  return contact_forces_and_anchors(model, state, ground).first;
}

Mat7 mass_matrix(const PlanarModel& model, const RobotState& state) {
  const TreeContext tree = build_tree(model, state.q);

  Mat3 composite[kNumBodies];
  for (int i = 0; i < kNumBodies; ++i) composite[i] = tree.inertia[i];
  for (int i = kNumBodies - 1; i > 0; --i)
    composite[kParent[i]] += inertia_to_parent(tree.xform[i], composite[i]);

  Mat7 M = Mat7::Zero();
  for (int i = 0; i < kNumBodies; ++i) {
    Vec3 f = composite[i] * tree.subspace[i];
    M(i, i) = tree.subspace[i].dot(f);
    int j = i;
    while (kParent[j] >= 0) {
      f = force_to_parent(tree.xform[j], f);
      j = kParent[j];
      M(i, j) = M(j, i) = f.dot(tree.subspace[j]);
    }
  }
  return M;
}

Vec7 bias_forces(const PlanarModel& model, const RobotState& state) {
  const TreeContext tree = build_tree(model, state.q);

  Vec3 vel[kNumBodies], acc[kNumBodies], force[kNumBodies];
  const Vec3 a_world(0.0, 0.0, model.gravity);  // gravity via base acceleration trick

  for (int i = 0; i < kNumBodies; ++i) {
    const int p = kParent[i];
    const Vec3 vj = tree.subspace[i] * state.v[i];
    const Vec3 v_parent = (p >= 0) ? vel[p] : Vec3::Zero();
    const Vec3 a_parent = (p >= 0) ? acc[p] : a_world;
    vel[i] = motion_to_child(tree.xform[i], v_parent) + vj;
    acc[i] = motion_to_child(tree.xform[i], a_parent) + crm(vel[i], vj);
    force[i] = tree.inertia[i] * acc[i] + crf(vel[i], tree.inertia[i] * vel[i]);
  }

  Vec7 h;
  for (int i = kNumBodies - 1; i >= 0; --i) {
    h[i] = tree.subspace[i].dot(force[i]);
    if (kParent[i] >= 0)
      force[kParent[i]] += force_to_parent(tree.xform[i], force[i]);
  }
  return h;
}

Vec7 forward_dynamics(const PlanarModel& model, const RobotState& state,
                      const Vec4& joint_torques, const GroundModel& ground,
                      const BaseWrench& external) {
  const ContactReport report = contact_forces_and_anchors(model, state, ground).first;
  return acceleration_from(model, state, joint_torques, report, external);
}

RobotState step(const PlanarModel& model, const RobotState& state,
                const Vec4& joint_torques, const GroundModel& ground, double dt,
                const BaseWrench& external, double sanity_bound) {
  if (dt <= 0.0) throw std::invalid_argument("step: dt must be positive");

  auto [report1, anchors1] = contact_forces_and_anchors(model, state, ground);
  const Vec7 a1 = acceleration_from(model, state, joint_torques, report1, external);

  RobotState mid;
  mid.v = state.v + 0.5 * dt * a1;
  mid.q = state.q + dt * mid.v;
  mid.t = state.t + dt;
  mid.anchors = anchors1;

  auto [report2, anchors2] = contact_forces_and_anchors(model, mid, ground);
  const Vec7 a2 = acceleration_from(model, mid, joint_torques, report2, external);

  RobotState next = mid;
  next.v = mid.v + 0.5 * dt * a2;
  next.anchors = anchors2;

  if (!next.all_finite() || next.q.cwiseAbs().maxCoeff() > sanity_bound ||
      next.v.cwiseAbs().maxCoeff() > sanity_bound)
    throw std::runtime_error("step: state blow-up (exceeded sanity bound)");
  return next;
}

double total_energy(const PlanarModel& model, const RobotState& state,
                    const GroundModel& ground) {
  const double kinetic = 0.5 * state.v.dot(mass_matrix(model, state) * state.v);

  const double theta = state.q[2];
  const Vec2 base(state.q[0], state.q[1]);
  double potential = model.base_mass * base.y();
  for (Foot foot : {Foot::Front, Foot::Back}) {
    const auto leg = leg_indices(model, foot);
    const Vec2 hip = base + rot2(theta) * leg.hip_offset;
    const Vec2 upper_com =
        hip + rot2(theta + state.q[leg.hip]) * Vec2(0.0, -0.5 * model.upper_leg_length);
    const Vec2 knee =
        hip + rot2(theta + state.q[leg.hip]) * Vec2(0.0, -model.upper_leg_length);
    const Vec2 lower_com =
        knee + rot2(theta + state.q[leg.hip] + state.q[leg.knee]) *
                   Vec2(0.0, -0.5 * model.lower_leg_length);
    potential += model.upper_leg_mass * upper_com.y() + model.lower_leg_mass * lower_com.y();
  }
  potential *= model.gravity;

  double spring = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    const double q = state.q[3 + j];
    double excess = 0.0;
    if (q > model.joint_upper[j]) excess = q - model.joint_upper[j];
    else if (q < model.joint_lower[j]) excess = q - model.joint_lower[j];
    spring += 0.5 * model.joint_limit_stiffness * excess * excess;
  }
  for (int i = 0; i < kNumFeet; ++i) {
    const auto kin = foot_kinematics(model, state, static_cast<Foot>(i));
    const double pen = ground.height - kin.position.y();
    if (pen > 0.0) {
      spring += 0.5 * ground.contact_stiffness * pen * pen;
      if (state.anchors[i].active) {
        const double stretch = kin.position.x() - state.anchors[i].x;
        spring += 0.5 * ground.tangential_stiffness * stretch * stretch;
      }
    }
  }
  return kinetic + potential + spring;
}

}  // namespace locoforge
