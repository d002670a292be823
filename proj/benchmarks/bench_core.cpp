#include <benchmark/benchmark.h>

#include "locoforge/config.hpp"
#include "locoforge/dynamics.hpp"
#include "locoforge/ppo.hpp"

using namespace locoforge;

namespace {

RobotState standing_state() {
  RobotState s;
  s.q << 0, 0.20, 0, 0.6435, -1.287, -0.6435, 1.287;
  return s;
}

void BM_MassMatrix(benchmark::State& state) {
  PlanarModel model;
  const RobotState s = standing_state();
  for (auto _ : state) benchmark::DoNotOptimize(mass_matrix(model, s));
}
BENCHMARK(BM_MassMatrix);

void BM_PhysicsStep(benchmark::State& state) {
  PlanarModel model;
  GroundModel ground;
  RobotState s = standing_state();
  const Vec4 tau = Vec4::Constant(0.5);
  for (auto _ : state) {
    s = step(model, s, tau, ground, 1e-3);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_PhysicsStep);

void BM_ActorForward(benchmark::State& state) {
  RandomEngine rng(3);
  const PolicyParams params = PolicyParams::create(10, 4, rng);
  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(10, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(actor_forward(params, obs));
}
BENCHMARK(BM_ActorForward);

void BM_ActorBackwardBatch(benchmark::State& state) {
  RandomEngine rng(3);
  PolicyParams params = PolicyParams::create(10, 4, rng);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(10, 512);
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Random(4, 512);
  for (auto _ : state) {
    Mlp::Workspace ws;
    benchmark::DoNotOptimize(params.actor.forward(obs, &ws));
    Mlp::Gradient grad = params.actor.zero_gradient();
    params.actor.backward(ws, upstream, grad);
    benchmark::DoNotOptimize(grad);
  }
}
BENCHMARK(BM_ActorBackwardBatch);

void BM_EnvStep(benchmark::State& state) {
  RunConfig cfg;
  const DemoTrajectory demo = resolve_demo(cfg.demo, cfg.model);
  Env env(cfg.model, cfg.gains, cfg.ground, cfg.rewards, demo, cfg.env);
  RandomEngine rng(1);
  env.reset(rng);
  Action act;
  act.q_des = demo.mean_joint_posture();
  for (auto _ : state) {
    if (env.done()) env.reset(rng);
    benchmark::DoNotOptimize(env.step(act));
  }
}
BENCHMARK(BM_EnvStep);

}  // namespace

BENCHMARK_MAIN();
