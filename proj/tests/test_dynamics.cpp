#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "locoforge/control.hpp"
#include "locoforge/dynamics.hpp"

using namespace locoforge;

namespace {

RobotState standing_state() {
  RobotState s;
  s.q << 0, 0.20, 0, 0.6435, -1.287, -0.6435, 1.287;
  return s;
}

RobotState random_state(std::mt19937_64& gen, double span = 1.5) {
  std::uniform_real_distribution<double> u(-span, span);
  RobotState s;
  for (int i = 0; i < kNumDof; ++i) {
    s.q[i] = u(gen);
    s.v[i] = u(gen);
  }
  return s;
}

}  // namespace

TEST_CASE("straight legs put feet directly below the hips") {
  PlanarModel model;
  RobotState s;
  s.q[1] = 0.6;
  for (Foot foot : {Foot::Front, Foot::Back}) {
    const auto kin = foot_kinematics(model, s, foot);
    const Vec2 hip = foot == Foot::Front ? model.front_hip_offset : model.back_hip_offset;
    CHECK(kin.position.x() == doctest::Approx(hip.x()).epsilon(1e-14));
    CHECK(kin.position.y() == doctest::Approx(0.6 - model.leg_reach()).epsilon(1e-14));
  }
}

TEST_CASE("foot jacobian matches central finite differences") {
  PlanarModel model;
  std::mt19937_64 gen(11);
  const double eps = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const RobotState s = random_state(gen);
    for (Foot foot : {Foot::Front, Foot::Back}) {
      const int base = foot == Foot::Front ? 3 : 5;
      const Mat2 jac = foot_kinematics(model, s, foot).jacobian;
      for (int c = 0; c < 2; ++c) {
        RobotState hi = s, lo = s;
        hi.q[base + c] += eps;
        lo.q[base + c] -= eps;
        const Vec2 fd = (foot_kinematics(model, hi, foot).position -
                         foot_kinematics(model, lo, foot).position) /
                        (2.0 * eps);
        const double scale = std::max(1.0, jac.col(c).norm());
        worst = std::max(worst, (fd - jac.col(c)).norm() / scale);
      }
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("straight knee is a jacobian singularity") {
  PlanarModel model;
  RobotState s;
  s.q[1] = 0.5;
  CHECK(foot_kinematics(model, s, Foot::Front).jacobian.determinant() == 0.0);
}

TEST_CASE("foot velocity is the time derivative of foot position") {
  PlanarModel model;
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const RobotState s = random_state(gen);
    RobotState shifted = s;
    const double h = 1e-7;
    shifted.q += s.v * h;
    for (Foot foot : {Foot::Front, Foot::Back}) {
      const auto kin = foot_kinematics(model, s, foot);
      const Vec2 fd =
          (foot_kinematics(model, shifted, foot).position - kin.position) / h;
      CHECK((fd - kin.velocity).norm() < 1e-5);
    }
  }
}

TEST_CASE("no contact above the ground") {
  PlanarModel model;
  GroundModel ground;
  RobotState s;
  s.q[1] = 1.0;
  const ContactReport report = contact_forces(model, s, ground);
  for (const auto& foot : report.feet) {
    CHECK_FALSE(foot.in_contact);
    CHECK(foot.force.norm() == 0.0);
    CHECK(foot.penetration == 0.0);
  }
}

TEST_CASE("static rest carries the full weight through the feet") {
  PlanarModel model;
  GroundModel ground;
  PDGains gains;
  RobotState s = standing_state();
  const Vec4 target = s.joints();
  for (int i = 0; i < 20000; ++i) {
    Action act;
    act.q_des = target;
    s = step(model, s, pd_torques(gains, act, s), ground, 1e-3);
  }
  CHECK(s.v.norm() < 1e-8);
  const ContactReport report = contact_forces(model, s, ground);
  const double fz = report.front().force.y() + report.back().force.y();
  CHECK(std::abs(fz - model.total_mass() * model.gravity) < 1e-6);
}

TEST_CASE("tangential force stays inside the friction cone") {
  PlanarModel model;
  GroundModel ground;
  ground.friction_coeff = 0.6;
  RobotState s = standing_state();
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-2.7, 2.7);
  Vec4 tau = Vec4::Zero();
  for (int i = 0; i < 10000; ++i) {
    if (i % 50 == 0)
      for (int j = 0; j < kNumJoints; ++j) tau[j] = u(gen);
    const ContactReport report = contact_forces(model, s, ground);
    for (const auto& foot : report.feet) {
      if (!foot.in_contact) continue;
      CHECK(foot.force.y() >= 0.0);
      CHECK(std::abs(foot.force.x()) <= ground.friction_coeff * foot.force.y() + 1e-12);
    }
    s = step(model, s, tau, ground, 1e-3);
  }
}

TEST_CASE("free fall from a symmetric configuration") {
  PlanarModel model;
  GroundModel ground;
  RobotState s;
  s.q[1] = 5.0;
  const Vec7 a = forward_dynamics(model, s, Vec4::Zero(), ground);
  CHECK(a[0] == 0.0);
  CHECK(a[2] == 0.0);
  CHECK(a[1] == doctest::Approx(-model.gravity).epsilon(1e-14));
  // a uniform gravity field induces no joint accelerations in free fall
  for (int j = 3; j < kNumDof; ++j) CHECK(std::abs(a[j]) < 1e-12);

  // the same holds from a bent symmetric configuration
  RobotState bent = standing_state();
  bent.q[1] = 5.0;
  const Vec7 ab = forward_dynamics(model, bent, Vec4::Zero(), ground);
  CHECK(std::abs(ab[0]) < 1e-12);
  CHECK(std::abs(ab[2]) < 1e-12);
  CHECK(ab[1] == doctest::Approx(-model.gravity).epsilon(1e-12));
  for (int j = 3; j < kNumDof; ++j) CHECK(std::abs(ab[j]) < 1e-10);
}

TEST_CASE("mass matrix is symmetric positive definite at random states") {
  PlanarModel model;
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const RobotState s = random_state(gen);
    const Mat7 M = mass_matrix(model, s);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat7> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("kinetic energy from the mass matrix matches per-body kinematics") {
  // independent route: 0.5 m |v_com|^2 + 0.5 I w^2 with com velocities from
  // finite differences of the body com positions
  PlanarModel model;
  std::mt19937_64 gen(21);
  auto com_positions = [&](const RobotState& s) {
    std::vector<std::pair<double, Vec2>> out;  // mass, world com
    const Vec2 base(s.q[0], s.q[1]);
    out.push_back({model.base_mass, base});
    for (Foot foot : {Foot::Front, Foot::Back}) {
      const Vec2 off = foot == Foot::Front ? model.front_hip_offset : model.back_hip_offset;
      const int ih = foot == Foot::Front ? 3 : 5;
      const Vec2 hip = base + rot2(s.q[2]) * off;
      const Vec2 upper_com =
          hip + rot2(s.q[2] + s.q[ih]) * Vec2(0, -0.5 * model.upper_leg_length);
      const Vec2 knee = hip + rot2(s.q[2] + s.q[ih]) * Vec2(0, -model.upper_leg_length);
      const Vec2 lower_com =
          knee + rot2(s.q[2] + s.q[ih] + s.q[ih + 1]) * Vec2(0, -0.5 * model.lower_leg_length);
      out.push_back({model.upper_leg_mass, upper_com});
      out.push_back({model.lower_leg_mass, lower_com});
    }
    return out;
  };

  for (int trial = 0; trial < 20; ++trial) {
    const RobotState s = random_state(gen);
    const double ke_matrix = 0.5 * s.v.dot(mass_matrix(model, s) * s.v);

    const double h = 1e-7;
    RobotState hi = s, lo = s;
    hi.q += s.v * h;
    lo.q -= s.v * h;
    const auto chi = com_positions(hi), clo = com_positions(lo), c0 = com_positions(s);
    double ke_bodies = 0.0;
    for (size_t b = 0; b < c0.size(); ++b) {
      const Vec2 vel = (chi[b].second - clo[b].second) / (2.0 * h);
      ke_bodies += 0.5 * c0[b].first * vel.squaredNorm();
    }
    const double inertias[5] = {model.base_inertia, model.upper_leg_inertia,
                                model.lower_leg_inertia, model.upper_leg_inertia,
                                model.lower_leg_inertia};
    const double omegas[5] = {s.v[2], s.v[2] + s.v[3], s.v[2] + s.v[3] + s.v[4],
                              s.v[2] + s.v[5], s.v[2] + s.v[5] + s.v[6]};
    for (int b = 0; b < 5; ++b) ke_bodies += 0.5 * inertias[b] * omegas[b] * omegas[b];

    CHECK(ke_matrix == doctest::Approx(ke_bodies).epsilon(1e-6));
  }
}

TEST_CASE("degenerate pendulum submodel follows the closed-form equation") {
  // lower link carries the mass, knee welded by stiff joint stops, base
  // welded by a stiff external spring: a compound pendulum about the hip with
  // equivalent length L = I_hip / (m d)
  PlanarModel model;
  model.base_mass = 2.0;
  model.base_inertia = 0.02;
  model.upper_leg_length = 0.1;
  model.lower_leg_length = 0.1;
  model.upper_leg_mass = 1e-6;
  model.upper_leg_inertia = 1e-8;
  model.lower_leg_mass = 0.2;
  model.lower_leg_inertia =
      model.lower_leg_mass * model.lower_leg_length * model.lower_leg_length / 12.0;
  model.joint_lower = Vec4(-10.0, 0.0, -10.0, 0.0);  // knees locked straight
  model.joint_upper = Vec4(10.0, 0.0, 10.0, 0.0);
  model.joint_limit_stiffness = 5e3;
  model.joint_limit_damping = 1.0;

  GroundModel ground;
  ground.height = -100.0;

  const double lever = model.upper_leg_length + 0.5 * model.lower_leg_length;
  const double hip_inertia =
      model.lower_leg_inertia + model.lower_leg_mass * lever * lever;
  const double length = hip_inertia / (model.lower_leg_mass * lever);
  const double theta0 = 0.3;

  RobotState s;
  s.q[1] = 1.0;
  s.q[3] = theta0;
  const Vec2 anchor(0.0, 1.0);

  // reference: RK4 on theta'' = -(g/L) sin(theta)
  const double g_over_l = model.gravity / length;
  const double dt_ref = 1e-6;
  std::vector<double> reference;  // sampled every 10 ms
  {
    double th = theta0, w = 0.0, t = 0.0;
    auto acc = [&](double x) { return -g_over_l * std::sin(x); };
    int next_sample = 0;
    for (int i = 0; t < 1.0 + dt_ref; ++i, t = i * dt_ref) {
      if (t >= next_sample * 0.01 - dt_ref / 2) {
        reference.push_back(th);
        ++next_sample;
      }
      const double k1t = w, k1w = acc(th);
      const double k2t = w + 0.5 * dt_ref * k1w, k2w = acc(th + 0.5 * dt_ref * k1t);
      const double k3t = w + 0.5 * dt_ref * k2w, k3w = acc(th + 0.5 * dt_ref * k2t);
      const double k4t = w + dt_ref * k3w, k4w = acc(th + dt_ref * k3t);
      th += dt_ref / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t);
      w += dt_ref / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
    }
  }

  const double dt = 2e-6;
  const int steps = static_cast<int>(1.0 / dt);
  double worst = 0.0;
  int next_sample = 0;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    if (t >= next_sample * 0.01 - dt / 2) {
      if (next_sample < static_cast<int>(reference.size()))
        worst = std::max(worst, std::abs(s.q[3] - reference[next_sample]));
      ++next_sample;
    }
    BaseWrench weld;
    weld.force = -1e7 * (Vec2(s.q[0], s.q[1]) - anchor) - 6e3 * Vec2(s.v[0], s.v[1]);
    weld.torque = -1e5 * s.q[2] - 100.0 * s.v[2];
    s = step(model, s, Vec4::Zero(), ground, dt, weld);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("ballistic flight matches the closed form") {
  PlanarModel model;
  GroundModel ground;
  RobotState s;
  s.q[1] = 1.0;
  for (int i = 0; i < 300; ++i) s = step(model, s, Vec4::Zero(), ground, 1e-3);
  CHECK(std::abs(s.q[1] - (1.0 - 0.5 * model.gravity * 0.09)) < 1e-3);
  CHECK(s.t == doctest::Approx(0.3));
}

TEST_CASE("horizontal momentum is conserved in flight") {
  PlanarModel model;
  GroundModel ground;
  RobotState s;
  s.q[1] = 3.0;
  s.v << 0.4, 0.1, 0.5, -0.3, 0.4, 0.2, -0.5;
  double px = (mass_matrix(model, s) * s.v)[0];
  for (int i = 0; i < 200; ++i) {
    s = step(model, s, Vec4::Zero(), ground, 1e-3);
    const double px_new = (mass_matrix(model, s) * s.v)[0];
    CHECK(std::abs(px_new - px) < 1e-9);
    px = px_new;
  }
}

TEST_CASE("stepping is deterministic") {
  PlanarModel model;
  GroundModel ground;
  RobotState s = standing_state();
  s.v[1] = -0.4;
  const Vec4 tau(0.3, -0.2, 0.5, 0.1);
  const RobotState a = step(model, s, tau, ground, 1e-3);
  const RobotState b = step(model, s, tau, ground, 1e-3);
  CHECK(a.q == b.q);
  CHECK(a.v == b.v);
  CHECK(a.t == b.t);
}

TEST_CASE("step signals blow-up") {
  PlanarModel model;
  GroundModel ground;
  RobotState s;
  s.q[1] = 0.5;
  s.v[0] = 2e6;  // beyond the sanity bound
  CHECK_THROWS_AS(step(model, s, Vec4::Zero(), ground, 1e-3), std::runtime_error);
}

TEST_CASE("singular mass matrix is reported") {
  PlanarModel model;  // zero leg masses bypass validate() on purpose
  model.upper_leg_mass = 0.0;
  model.lower_leg_mass = 0.0;
  model.upper_leg_inertia = 0.0;
  model.lower_leg_inertia = 0.0;
  GroundModel ground;
  RobotState s;
  s.q[1] = 1.0;
  CHECK_THROWS_WITH_AS(forward_dynamics(model, s, Vec4::Zero(), ground),
                       doctest::Contains("singular"), std::runtime_error);
}

TEST_CASE("passive mechanical energy is non-increasing") {
  PlanarModel model;
  GroundModel ground;
  ground.contact_damping = 300.0;
  const double tol = 1e-4 * model.total_mass() * model.gravity * model.leg_reach();

  // grounded rollout with mild joint motion, run in the integrator-accuracy
  // regime; steps where a foot's contact state flips are discretization
  // events and excluded
  const double dt = 2e-4;
  RobotState s = standing_state();
  s.q[1] = 0.195;
  s.v << 0, 0, 0, 0.3, -0.3, 0.2, -0.2;
  auto flags = [&](const RobotState& st) {
    const ContactReport r = contact_forces(model, st, ground);
    return std::make_pair(r.front().in_contact, r.back().in_contact);
  };
  double prev = total_energy(model, s, ground);
  auto prev_flags = flags(s);
  for (int i = 0; i < 10000; ++i) {
    s = step(model, s, Vec4::Zero(), ground, dt);
    const double e = total_energy(model, s, ground);
    const auto f = flags(s);
    if (f == prev_flags) CHECK(e - prev <= tol);
    prev = e;
    prev_flags = f;
  }

  // pure flight: conservative to integrator tolerance
  RobotState fly;
  fly.q << 0, 3.0, 0.2, 0.4, -0.9, -0.2, 0.7;
  fly.v << 0.5, 1.0, 0.8, -1.0, 0.5, 0.7, -0.4;
  prev = total_energy(model, fly, ground);
  for (int i = 0; i < 500; ++i) {
    fly = step(model, fly, Vec4::Zero(), ground, 1e-3);
    const double e = total_energy(model, fly, ground);
    CHECK(std::abs(e - prev) <= tol);
    prev = e;
  }
}
