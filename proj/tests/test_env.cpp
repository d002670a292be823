#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locoforge/env.hpp"

using namespace locoforge;

namespace {

Env make_env(Task task, int stage, int max_steps = 500) {
  PlanarModel model;
  const DemoTrajectory demo =
      task == Task::Hopping ? synthesize_hop_demo(0.35, 0.09, 0.5, 0.01, model)
                            : synthesize_bound_demo(0.35, 0.03, 0.5, 0.01, model);
  EnvConfig cfg = EnvConfig::defaults_for(task, stage);
  cfg.max_steps = max_steps;
  return Env(model, PDGains{}, GroundModel{}, RewardWeights{}, demo, cfg);
}

}  // namespace

TEST_CASE("observation dimensions per task") {
  Env hop = make_env(Task::Hopping, 1);
  Env bound = make_env(Task::Bounding, 1);
  RandomEngine rng(1);
  CHECK(hop.reset(rng).size() == 10);
  CHECK(bound.reset(rng).size() == 12);
}

TEST_CASE("observation carries no time, phase or demo channel") {
  Env env = make_env(Task::Hopping, 1);
  RandomEngine rng(5);
  env.reset(rng);
  RobotState s = env.state();
  GroundModel g = env.ground();

  s.t = 0.0;
  env.reset_to(s, g);
  const Eigen::VectorXd a = env.observe();
  s.t = 123.456;
  env.reset_to(s, g);
  const Eigen::VectorXd b = env.observe();
  CHECK(a == b);
}

TEST_CASE("z channel inverse-normalizes to the state value") {
  Env env = make_env(Task::Hopping, 1);
  RandomEngine rng(2);
  env.reset(rng);
  const Eigen::VectorXd obs = env.observe();
  const Eigen::VectorXd raw = env.scales().denormalize(obs);
  CHECK(std::abs(raw[0] - env.state().base_z()) < 1e-12);
  CHECK(std::abs(raw[1] - env.state().v[1]) < 1e-12);
}

TEST_CASE("stage-1 reset lands on a demo frame, reproducibly") {
  Env env = make_env(Task::Hopping, 1);
  RandomEngine a(42), b(42);
  env.reset(a);
  const RobotState s1 = env.state();
  const int idx1 = env.demo_start_index();
  env.reset(b);
  CHECK(env.demo_start_index() == idx1);
  CHECK(env.state().q == s1.q);
  CHECK(env.state().v == s1.v);
  CHECK(s1.q == env.demo().frames[idx1].q);
  CHECK(env.ground().height == 0.0);
  CHECK(env.ground().friction_coeff == 1.0);
}

TEST_CASE("stage-2 resets cover the randomization ranges and start valid") {
  Env env = make_env(Task::Hopping, 2);
  RandomEngine rng(7);
  double h_min = 1e9, h_max = -1e9, f_min = 1e9, f_max = -1e9;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset(rng);
    const GroundModel& g = env.ground();
    h_min = std::min(h_min, g.height);
    h_max = std::max(h_max, g.height);
    f_min = std::min(f_min, g.friction_coeff);
    f_max = std::max(f_max, g.friction_coeff);

    const RobotState& s = env.state();
    CHECK(std::abs(s.pitch()) <= env.config().tilt_limit);
    CHECK(s.v.norm() == 0.0);
    for (Foot foot : {Foot::Front, Foot::Back}) {
      CHECK(foot_kinematics(env.model(), s, foot).position.y() >= g.height);
      CHECK(knee_position(env.model(), s, foot).y() >= g.height);
    }
    for (const Vec2& corner : base_corners(env.model(), s))
      CHECK(corner.y() >= g.height);
  }
  CHECK(h_min >= -0.05);
  CHECK(h_max <= 0.05);
  CHECK(f_min >= 0.5);
  CHECK(f_max <= 1.0);
  CHECK((h_max - h_min) / 0.10 >= 0.99);
  CHECK((f_max - f_min) / 0.50 >= 0.99);
}

TEST_CASE("ground stays fixed within an episode") {
  Env env = make_env(Task::Hopping, 2, 50);
  RandomEngine rng(3);
  env.reset(rng);
  const double h = env.ground().height;
  const double f = env.ground().friction_coeff;
  Action act;
  act.q_des = env.demo().mean_joint_posture();
  for (int i = 0; i < 50 && !env.done(); ++i) {
    env.step(act);
    CHECK(env.ground().height == h);
    CHECK(env.ground().friction_coeff == f);
  }
}

TEST_CASE("tilt beyond the limit terminates") {
  Env env = make_env(Task::Hopping, 1);
  RobotState s;
  s.q << 0, 0.3, 0.6, 0.3, -0.6, -0.3, 0.6;  // pitch past the 0.5 rad limit
  env.reset_to(s, GroundModel{});
  Action act;
  act.q_des = s.joints();
  const StepResult r = env.step(act);
  CHECK(r.terminated);
  CHECK_FALSE(r.truncated);
  CHECK_THROWS_AS(env.step(act), std::logic_error);
}

TEST_CASE("time limit truncates without termination") {
  Env env = make_env(Task::Hopping, 1, 20);
  RandomEngine rng(11);
  // 20-step episode standing in place
  RobotState s;
  s.q << 0, 0.20, 0, 0.6435, -1.287, -0.6435, 1.287;
  env.reset_to(s, GroundModel{});
  Action act;
  act.q_des = s.joints();
  StepResult r;
  for (int i = 0; i < 20; ++i) r = env.step(act);
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);
}

TEST_CASE("episodes are deterministic given seed and actions") {
  for (int stage : {1, 2}) {
    Env a = make_env(Task::Bounding, stage, 60);
    Env b = make_env(Task::Bounding, stage, 60);
    RandomEngine ra(99), rb(99);
    a.reset(ra);
    b.reset(rb);
    Action act;
    act.q_des = a.demo().mean_joint_posture();
    for (int i = 0; i < 60; ++i) {
      if (a.done()) break;
      const StepResult sa = a.step(act);
      const StepResult sb = b.step(act);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.observation == sb.observation);
      CHECK(sa.terminated == sb.terminated);
    }
  }
}

TEST_CASE("replaying demo joint targets keeps the stage-1 reward positive") {
  Env env = make_env(Task::Hopping, 1);
  RandomEngine rng(1234);
  env.reset(rng);
  const int k0 = env.demo_start_index();
  const DemoTrajectory& demo = env.demo();

  int steps = 0;
  for (int i = 0; i < 200; ++i) {
    Action act;
    act.q_des = demo.frames[demo.wrap_index(k0 + i + 1)].q.tail<4>();
    const StepResult r = env.step(act);
    ++steps;
    CHECK(r.breakdown.ti > 0.0);
    CHECK(r.reward > 0.0);
    if (r.terminated || r.truncated) break;
  }
  CHECK(steps >= 50);
}

TEST_CASE("trace records one row per step plus the initial state") {
  Env env = make_env(Task::Hopping, 1, 30);
  env.set_trace_enabled(true);
  RandomEngine rng(6);
  env.reset(rng);
  Action act;
  act.q_des = env.demo().mean_joint_posture();
  int steps = 0;
  for (int i = 0; i < 30 && !env.done(); ++i) {
    env.step(act);
    ++steps;
  }
  CHECK(static_cast<int>(env.trace().size()) == steps + 1);

  const std::string path = "/tmp/locoforge_trace_test.csv";
  write_trace_csv(env.trace(), path);
  const auto back = read_trace_csv(path);
  REQUIRE(back.size() == env.trace().size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].state.q == env.trace()[i].state.q);
    CHECK(back[i].torque == env.trace()[i].torque);
    CHECK(back[i].breakdown.total == env.trace()[i].breakdown.total);
  }
  std::remove(path.c_str());
}

TEST_CASE("contact forces respect the friction cone along a rollout") {
  Env env = make_env(Task::Hopping, 2, 100);
  RandomEngine rng(8);
  env.reset(rng);
  Action act;
  act.q_des = env.demo().mean_joint_posture();
  for (int i = 0; i < 100 && !env.done(); ++i) {
    const StepResult r = env.step(act);
    for (const auto& foot : r.contact.feet) {
      if (!foot.in_contact) continue;
      CHECK(foot.force.y() >= 0.0);
      CHECK(std::abs(foot.force.x()) <=
            env.ground().friction_coeff * foot.force.y() + 1e-12);
    }
  }
}

TEST_CASE("config validation") {
  EnvConfig cfg = EnvConfig::defaults_for(Task::Hopping, 1);
  cfg.substeps = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnvConfig::defaults_for(Task::Hopping, 3);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
