#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "locoforge/ppo.hpp"
#include "locoforge/toy_env.hpp"

using namespace locoforge;
namespace fs = std::filesystem;

namespace {

RolloutBatch random_batch(int obs_dim, int act_dim, int n, std::uint64_t seed) {
  RandomEngine rng(seed);
  RolloutBatch b = RolloutBatch::allocate(obs_dim, act_dim, n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < obs_dim; ++d) b.observations(d, i) = rng.uniform(-1, 1);
    for (int d = 0; d < act_dim; ++d) b.actions(d, i) = rng.uniform(-1, 1);
    b.rewards[i] = rng.uniform(-1, 1);
    b.values[i] = rng.uniform(-1, 1);
    b.next_values[i] = rng.uniform(-1, 1);
    b.terminated[i] = rng.uniform(0, 1) < 0.15;
    b.done[i] = b.terminated[i] || rng.uniform(0, 1) < 0.1;
  }
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

std::vector<std::unique_ptr<RolloutEnv>> toy_envs(int count, int horizon = 50) {
  std::vector<std::unique_ptr<RolloutEnv>> envs;
  for (int i = 0; i < count; ++i) envs.push_back(std::make_unique<PointMassEnv>(horizon));
  return envs;
}

std::vector<RandomEngine> seeded_rngs(int count, std::uint64_t base) {
  std::vector<RandomEngine> rngs;
  for (int i = 0; i < count; ++i) rngs.emplace_back(base + i);
  return rngs;
}

}  // namespace

TEST_CASE("GAE: lambda = 0 reduces to the TD residual") {
  RolloutBatch b = random_batch(2, 1, 40, 17);
  compute_gae(b, 0.9, 0.0, 20);
  for (int i = 0; i < b.size(); ++i) {
    const double nonterm = b.terminated[i] ? 0.0 : 1.0;
    const double delta = b.rewards[i] + 0.9 * b.next_values[i] * nonterm - b.values[i];
    CHECK(b.advantages[i] == doctest::Approx(delta).epsilon(1e-15));
  }
}

TEST_CASE("GAE: gamma = lambda = 1 with zero values gives reward-to-go") {
  const int horizon = 16;
  RolloutBatch b = RolloutBatch::allocate(1, 1, horizon);
  RandomEngine rng(3);
  for (int i = 0; i < horizon; ++i) b.rewards[i] = rng.uniform(-1, 1);
  compute_gae(b, 1.0, 1.0, horizon);
  for (int t = 0; t < horizon; ++t) {
    double suffix = 0.0;
    for (int k = t; k < horizon; ++k) suffix += b.rewards[k];
    CHECK(b.advantages[t] == doctest::Approx(suffix).epsilon(1e-12));
  }
}

TEST_CASE("GAE matches a brute-force recursion on random sequences") {
  RandomEngine seeds(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int horizon = 20;
    RolloutBatch b = random_batch(1, 1, horizon, 1000 + trial);
    const double gamma = seeds.uniform(0.8, 1.0);
    const double lambda = seeds.uniform(0.0, 1.0);

    RolloutBatch reference = b;
    compute_gae(b, gamma, lambda, horizon);

    // direct truncated-sum oracle: A_t = sum_l (gamma lambda)^l delta_{t+l},
    // stopping the sum at the first done flag
    for (int t = 0; t < horizon; ++t) {
      double sum = 0.0, factor = 1.0;
      for (int l = t; l < horizon; ++l) {
        const double nonterm = reference.terminated[l] ? 0.0 : 1.0;
        const double delta = reference.rewards[l] +
                             gamma * reference.next_values[l] * nonterm -
                             reference.values[l];
        sum += factor * delta;
        if (reference.done[l]) break;
        factor *= gamma * lambda;
      }
      CHECK(b.advantages[t] == doctest::Approx(sum).epsilon(1e-12));
      CHECK(b.returns[t] == doctest::Approx(sum + reference.values[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("collect_rollouts: batch shape and behavior log-probs") {
  auto envs = toy_envs(2, 6);
  auto rngs = seeded_rngs(2, 5);
  std::vector<RolloutCarry> carries(2);
  RandomEngine init(0);
  PolicyParams params = PolicyParams::create(1, 1, init, 8);
  RolloutBatch batch;
  const CollectStats stats = collect_rollouts(envs, params, 8, rngs, carries, batch);

  CHECK(batch.size() == 16);
  CHECK(stats.steps == 16);
  // 6-step episodes inside an 8-step horizon: at least one finished per env
  CHECK(stats.episode_lengths.size() >= 2);

  for (int i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd mean = actor_forward(params, batch.observations.col(i));
    const double lp = gaussian_log_prob(mean, params.log_std, batch.actions.col(i));
    CHECK(std::abs(lp - batch.log_probs[i]) < 1e-10);
    CHECK(batch.values[i] ==
          doctest::Approx(critic_value(params, batch.observations.col(i))).epsilon(1e-15));
  }
}

TEST_CASE("collect_rollouts is deterministic and worker-count independent") {
  RandomEngine init(2);
  PolicyParams params = PolicyParams::create(1, 1, init, 8);

  auto run = [&](int workers) {
    auto envs = toy_envs(4, 10);
    auto rngs = seeded_rngs(4, 77);
    std::vector<RolloutCarry> carries(4);
    RolloutBatch batch;
    collect_rollouts(envs, params, 16, rngs, carries, batch, workers);
    return batch;
  };

  const RolloutBatch a = run(1);
  const RolloutBatch b = run(1);
  const RolloutBatch c = run(4);
  const RolloutBatch d = run(3);
  CHECK(a.observations == b.observations);
  CHECK(a.actions == c.actions);
  CHECK(a.log_probs == c.log_probs);
  CHECK(a.rewards == d.rewards);
  CHECK(a.next_values == c.next_values);
  CHECK(a.terminated == c.terminated);
}

TEST_CASE("identity ratio with whole-batch minibatch gives zero surrogate") {
  RandomEngine init(4);
  PolicyParams params = PolicyParams::create(2, 1, init, 4);
  const int n = 32;
  RolloutBatch b = random_batch(2, 1, n, 21);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd mean = actor_forward(params, b.observations.col(i));
    b.log_probs[i] = gaussian_log_prob(mean, params.log_std, b.actions.col(i));
  }
  compute_gae(b, 0.99, 0.95, n);

  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_size = n;
  cfg.horizon = n;
  cfg.env_count = 1;
  cfg.learning_rate = 0.0;
  AdamState adam = AdamState::zeros(params.parameter_count());
  RandomEngine rng(1);
  const UpdateDiagnostics diag = ppo_update(params, adam, b, cfg, rng);
  CHECK(std::abs(diag.policy_loss) < 1e-12);
  CHECK(diag.clip_fraction == 0.0);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  RandomEngine init(6);
  PolicyParams params = PolicyParams::create(3, 2, init, 6);
  const Eigen::VectorXd before = params.flatten();

  RolloutBatch b = random_batch(3, 2, 24, 31);
  compute_gae(b, 0.99, 0.95, 12);
  PpoConfig cfg;
  cfg.epochs = 3;
  cfg.minibatch_size = 12;
  cfg.horizon = 12;
  cfg.env_count = 2;
  cfg.learning_rate = 0.0;
  AdamState adam = AdamState::zeros(params.parameter_count());
  RandomEngine rng(2);
  ppo_update(params, adam, b, cfg, rng);
  const Eigen::VectorXd after = params.flatten();
  for (Eigen::Index i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("surrogate gradient matches finite differences on a tiny net") {
  RandomEngine init(8);
  PolicyParams params = PolicyParams::create(2, 1, init, 3);
  const int n = 8;
  RandomEngine rng(14);
  Eigen::MatrixXd obs(2, n), act(1, n);
  Eigen::VectorXd logp_old(n), adv(n), ret(n);
  for (int i = 0; i < n; ++i) {
    obs(0, i) = rng.uniform(-1, 1);
    obs(1, i) = rng.uniform(-1, 1);
    act(0, i) = rng.uniform(-1, 1);
    const Eigen::VectorXd mean = actor_forward(params, obs.col(i));
    // jitter the behavior log-prob so ratios spread around 1
    logp_old[i] =
        gaussian_log_prob(mean, params.log_std, act.col(i)) + rng.uniform(-0.3, 0.3);
    adv[i] = rng.uniform(-1, 1);
    ret[i] = rng.uniform(-1, 1);
  }

  PpoConfig cfg;
  cfg.entropy_coef = 0.01;  // exercise the entropy path too
  GradientBuffer grads = GradientBuffer::zeros(params);
  ppo_minibatch_loss(params, obs, act, logp_old, adv, ret, cfg, &grads);
  const Eigen::VectorXd analytic = grads.flatten();

  const Eigen::VectorXd theta = params.flatten();
  const double eps = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    PolicyParams hi = params, lo = params;
    Eigen::VectorXd t = theta;
    t[i] += eps;
    hi.unflatten(t);
    t[i] -= 2 * eps;
    lo.unflatten(t);
    const double fhi =
        ppo_minibatch_loss(hi, obs, act, logp_old, adv, ret, cfg, nullptr).total;
    const double flo =
        ppo_minibatch_loss(lo, obs, act, logp_old, adv, ret, cfg, nullptr).total;
    const double fd = (fhi - flo) / (2 * eps);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("advantages are normalized inside the update") {
  RandomEngine init(10);
  PolicyParams params = PolicyParams::create(2, 1, init, 4);
  RolloutBatch b = random_batch(2, 1, 64, 41);
  compute_gae(b, 0.99, 0.95, 32);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_size = 32;
  cfg.horizon = 32;
  cfg.env_count = 2;
  cfg.learning_rate = 0.0;
  AdamState adam = AdamState::zeros(params.parameter_count());
  RandomEngine rng(3);
  ppo_update(params, adam, b, cfg, rng);
  const double mean = b.advantages.mean();
  const double stdv = std::sqrt((b.advantages.array() - mean).square().sum() / b.size());
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(stdv - 1.0) < 1e-6);
}

TEST_CASE("adam state round-trips through its sidecar file") {
  AdamState s = AdamState::zeros(5);
  Eigen::VectorXd params = Eigen::VectorXd::Ones(5);
  Eigen::VectorXd grad(5);
  grad << 0.1, -0.2, 0.3, 0.0, -0.5;
  s.apply(params, grad, 1e-3);
  s.apply(params, grad, 1e-3);

  const std::string path = (fs::temp_directory_path() / "adam_rt.txt").string();
  s.save(path);
  const AdamState t = AdamState::load(path);
  CHECK(t.step_count == 2);
  CHECK(t.m == s.m);
  CHECK(t.v == s.v);
  fs::remove(path);
}

TEST_CASE("point-mass task: mean return improves by at least half") {
  PpoConfig cfg;
  cfg.env_count = 4;
  cfg.horizon = 64;
  cfg.minibatch_size = 64;
  cfg.epochs = 4;
  cfg.total_updates = 50;
  cfg.seed = 3;

  RandomEngine init(cfg.seed);
  PolicyParams params = PolicyParams::create(1, 1, init, 16);
  AdamState adam = AdamState::zeros(params.parameter_count());
  auto envs = toy_envs(cfg.env_count, 50);
  auto rngs = seeded_rngs(cfg.env_count, cfg.seed + 1);
  std::vector<RolloutCarry> carries(cfg.env_count);
  RandomEngine update_rng(cfg.seed + 100);
  RolloutBatch batch;

  double first = 0.0, last = 0.0;
  for (int u = 0; u < cfg.total_updates; ++u) {
    const CollectStats stats =
        collect_rollouts(envs, params, cfg.horizon, rngs, carries, batch);
    double mean = 0.0;
    for (double r : stats.episode_returns) mean += r;
    mean /= std::max<size_t>(1, stats.episode_returns.size());
    if (u == 0) first = mean;
    if (u == cfg.total_updates - 1) last = mean;
    compute_gae(batch, cfg.gamma, cfg.gae_lambda, cfg.horizon);
    ppo_update(params, adam, batch, cfg, update_rng);
  }
  // returns are negative; at least 50% of the gap to zero must close
  CHECK(last >= first * 0.5);
  CHECK(last > first);
}

TEST_CASE("train_stage: resume reproduces the straight-through log byte for byte") {
  PlanarModel model;
  const DemoTrajectory demo = synthesize_hop_demo(0.35, 0.09, 0.5, 0.01, model);

  TrainStageOptions opt;
  opt.task = Task::Hopping;
  opt.stage = 1;
  opt.model = model;
  opt.demo = demo;
  opt.env_config = EnvConfig::defaults_for(Task::Hopping, 1);
  opt.env_config.max_steps = 40;
  opt.ppo.env_count = 2;
  opt.ppo.horizon = 16;
  opt.ppo.minibatch_size = 16;
  opt.ppo.epochs = 2;
  opt.ppo.total_updates = 6;
  opt.ppo.checkpoint_interval = 2;
  opt.ppo.seed = 11;

  const std::string dir_a = (fs::temp_directory_path() / "lf_train_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "lf_train_b").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  opt.out_dir = dir_a;
  train_stage(opt);

  opt.out_dir = dir_b;
  opt.ppo.total_updates = 4;
  train_stage(opt);
  opt.ppo.total_updates = 6;
  opt.resume = true;
  train_stage(opt);

  CHECK(read_file(dir_a + "/log.csv") == read_file(dir_b + "/log.csv"));
  CHECK(read_file(dir_a + "/policy_final.txt") == read_file(dir_b + "/policy_final.txt"));

  // worker count does not change the log either
  const std::string dir_c = (fs::temp_directory_path() / "lf_train_c").string();
  fs::remove_all(dir_c);
  opt.resume = false;
  opt.out_dir = dir_c;
  opt.workers = 2;
  train_stage(opt);
  CHECK(read_file(dir_a + "/log.csv") == read_file(dir_c + "/log.csv"));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("stage 2 requires an initial checkpoint") {
  TrainStageOptions opt;
  opt.stage = 2;
  opt.out_dir = (fs::temp_directory_path() / "lf_stage2_guard").string();
  PlanarModel model;
  opt.demo = synthesize_hop_demo(0.35, 0.09, 0.5, 0.01, model);
  CHECK_THROWS_AS(train_stage(opt), std::invalid_argument);
}

TEST_CASE("ppo config validation") {
  PpoConfig cfg;
  cfg.minibatch_size = 500;  // does not divide 16 * 256
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = PpoConfig{};
  cfg.clip_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
