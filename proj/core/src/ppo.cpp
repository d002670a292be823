#include "locoforge/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

namespace locoforge {

namespace fs = std::filesystem;

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PpoConfig: ") + what);
  };
  require(clip_ratio > 0.0 && clip_ratio < 1.0, "clip_ratio must be in (0, 1)");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must be in [0, 1]");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(epochs >= 1 && minibatch_size >= 1 && horizon >= 1 && env_count >= 1,
          "counts must be positive");
  require(total_updates >= 1, "total_updates must be >= 1");
  require(checkpoint_interval >= 1, "checkpoint_interval must be >= 1");
  require(batch_size() % minibatch_size == 0,
          "batch size must be a multiple of minibatch_size");
  require(grad_clip > 0.0, "grad_clip must be positive");
  require(value_coef >= 0.0 && entropy_coef >= 0.0, "loss coefs must be >= 0");
}

RolloutBatch RolloutBatch::allocate(int obs_dim, int act_dim, int n) {
  RolloutBatch b;
  b.observations = Eigen::MatrixXd::Zero(obs_dim, n);
  b.actions = Eigen::MatrixXd::Zero(act_dim, n);
  b.log_probs = Eigen::VectorXd::Zero(n);
  b.rewards = Eigen::VectorXd::Zero(n);
  b.values = Eigen::VectorXd::Zero(n);
  b.next_values = Eigen::VectorXd::Zero(n);
  b.terminated.assign(n, 0);
  b.done.assign(n, 0);
  b.advantages = Eigen::VectorXd::Zero(n);
  b.returns = Eigen::VectorXd::Zero(n);
  return b;
}

AdamState AdamState::zeros(int n) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  return s;
}

void AdamState::apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != m.size())
    throw std::invalid_argument("AdamState::apply: gradient size mismatch");
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double vc = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params -= (lr / mc) * m.cwiseQuotient(((v / vc).cwiseSqrt().array() + epsilon).matrix());
}

void AdamState::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("AdamState::save: cannot open " + path);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "locoforge-adam v1 n=%lld step=%lld beta1=%.17g beta2=%.17g eps=%.17g",
                static_cast<long long>(m.size()), step_count, beta1, beta2, epsilon);
  os << buf << "\n";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g", m[i], v[i]);
    os << buf << "\n";
  }
  if (!os) throw std::runtime_error("AdamState::save: write failed for " + path);
}

AdamState AdamState::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("AdamState::load: cannot open " + path);
  std::string header;
  std::getline(is, header);
  long long n = 0, step = 0;
  AdamState s;
  if (std::sscanf(header.c_str(), "locoforge-adam v1 n=%lld step=%lld beta1=%lf beta2=%lf eps=%lf",
                  &n, &step, &s.beta1, &s.beta2, &s.epsilon) != 5 || n < 0)
    throw std::runtime_error("AdamState::load: bad header in " + path);
  s.step_count = step;
  s.m.resize(n);
  s.v.resize(n);
  for (long long i = 0; i < n; ++i)
    if (!(is >> s.m[i] >> s.v[i]))
      throw std::runtime_error("AdamState::load: truncated file " + path);
  return s;
}

EnvStepOutcome LocomotionRolloutEnv::step(const Eigen::VectorXd& action) {
  Action act;
  act.q_des = action;
  const StepResult r = env_.step(act);
  EnvStepOutcome out;
  out.observation = r.observation;
  out.reward = r.reward;
  out.terminated = r.terminated;
  out.truncated = r.truncated;
  out.breakdown = r.breakdown;
  return out;
}

namespace {

struct PerEnvStats {
  std::vector<double> returns;
  std::vector<int> lengths;
  RewardBreakdown sums;
};

void accumulate(RewardBreakdown& into, const RewardBreakdown& b) {
  into.tt += b.tt;
  into.ti += b.ti;
  into.hp += b.hp;
  into.ps += b.ps;
  into.ct += b.ct;
  into.ts += b.ts;
  into.bn += b.bn;
  into.cc += b.cc;
  into.total += b.total;
}

}  // namespace

CollectStats collect_rollouts(std::vector<std::unique_ptr<RolloutEnv>>& envs,
                              const PolicyParams& params, int horizon,
                              std::vector<RandomEngine>& rngs,
                              std::vector<RolloutCarry>& carries,
                              RolloutBatch& batch, int workers) {
  const int env_count = static_cast<int>(envs.size());
  if (static_cast<int>(rngs.size()) != env_count ||
      static_cast<int>(carries.size()) != env_count)
    throw std::invalid_argument("collect_rollouts: envs, rngs and carries must align");
  const int n = env_count * horizon;
  if (batch.size() != n)
    batch = RolloutBatch::allocate(envs[0]->obs_dim(), envs[0]->act_dim(), n);

  std::vector<PerEnvStats> stats(env_count);

  auto run_env = [&](int e) {
    RolloutEnv& env = *envs[e];
    RandomEngine& rng = rngs[e];
    RolloutCarry& carry = carries[e];
    PerEnvStats& st = stats[e];

    for (int t = 0; t < horizon; ++t) {
      if (!carry.has_obs) {
        carry.obs = env.reset(rng);
        carry.has_obs = true;
        carry.episode_return = 0.0;
        carry.episode_length = 0;
      }
      const int i = e * horizon + t;
      batch.observations.col(i) = carry.obs;
      batch.values[i] = critic_value(params, carry.obs);

      auto [action, log_prob] = sample_action(params, carry.obs, rng);
      batch.actions.col(i) = action;
      batch.log_probs[i] = log_prob;

      const EnvStepOutcome out = env.step(action);
      batch.rewards[i] = out.reward;
      batch.next_values[i] = critic_value(params, out.observation);
      batch.terminated[i] = out.terminated ? 1 : 0;
      const bool done = out.terminated || out.truncated;
      batch.done[i] = done ? 1 : 0;
      accumulate(st.sums, out.breakdown);

      carry.episode_return += out.reward;
      carry.episode_length += 1;
      if (done) {
        st.returns.push_back(carry.episode_return);
        st.lengths.push_back(carry.episode_length);
        carry.has_obs = false;
      } else {
        carry.obs = out.observation;
      }
    }
  };

  const int used_workers = std::max(1, std::min(workers, env_count));
  if (used_workers == 1) {
    for (int e = 0; e < env_count; ++e) run_env(e);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(used_workers);
    for (int w = 0; w < used_workers; ++w)
      pool.emplace_back([&, w] {
        for (int e = w; e < env_count; e += used_workers) run_env(e);
      });
    for (auto& th : pool) th.join();
  }

  // merge in env order so the result does not depend on the worker count
  CollectStats merged;
  merged.steps = n;
  for (int e = 0; e < env_count; ++e) {
    merged.episode_returns.insert(merged.episode_returns.end(), stats[e].returns.begin(),
                                  stats[e].returns.end());
    merged.episode_lengths.insert(merged.episode_lengths.end(), stats[e].lengths.begin(),
                                  stats[e].lengths.end());
    accumulate(merged.term_sums, stats[e].sums);
  }
  return merged;
}

void compute_gae(RolloutBatch& batch, double gamma, double lambda, int horizon) {
  const int n = batch.size();
  if (horizon <= 0 || n % horizon != 0)
    throw std::invalid_argument("compute_gae: batch size must be a multiple of horizon");
  const int env_count = n / horizon;

  for (int e = 0; e < env_count; ++e) {
    double a_next = 0.0;
    for (int t = horizon - 1; t >= 0; --t) {
      const int i = e * horizon + t;
      const double nonterminal = batch.terminated[i] ? 0.0 : 1.0;
      const double delta =
          batch.rewards[i] + gamma * batch.next_values[i] * nonterminal - batch.values[i];
      const double chain = batch.done[i] ? 0.0 : a_next;
      a_next = delta + gamma * lambda * chain;
      batch.advantages[i] = a_next;
    }
  }
  batch.returns = batch.advantages + batch.values;
}

PpoLossTerms ppo_minibatch_loss(const PolicyParams& params, const Eigen::MatrixXd& obs,
                                const Eigen::MatrixXd& actions,
                                const Eigen::VectorXd& logp_old,
                                const Eigen::VectorXd& advantages,
                                const Eigen::VectorXd& returns, const PpoConfig& config,
                                GradientBuffer* grads) {
  const int mb = static_cast<int>(logp_old.size());
  const int act_dim = params.act_dim();
  const double kLog2Pi = 1.8378770664093453;

  Mlp::Workspace actor_ws, critic_ws;
  const Eigen::MatrixXd mean = params.actor.forward(obs, &actor_ws);
  const Eigen::VectorXd value = params.critic.forward(obs, &critic_ws).row(0);

  const Eigen::ArrayXd sigma = params.log_std.array().exp();
  Eigen::MatrixXd z(act_dim, mb);
  for (int k = 0; k < mb; ++k)
    z.col(k) = ((actions.col(k) - mean.col(k)).array() / sigma).matrix();

  Eigen::VectorXd logp_new(mb);
  const double logp_const = -params.log_std.sum() - 0.5 * act_dim * kLog2Pi;
  for (int k = 0; k < mb; ++k)
    logp_new[k] = -0.5 * z.col(k).squaredNorm() + logp_const;

  const Eigen::ArrayXd logratio = (logp_new - logp_old).array();
  const Eigen::ArrayXd ratio = logratio.exp();

  // clipped surrogate; gradient flows only where the unclipped branch is active
  PpoLossTerms terms;
  Eigen::VectorXd dlogp = Eigen::VectorXd::Zero(mb);
  for (int k = 0; k < mb; ++k) {
    const double a = advantages[k];
    const double r = ratio[k];
    const double unclipped = r * a;
    const double clamped =
        std::clamp(r, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio) * a;
    terms.policy_loss += -std::min(unclipped, clamped);
    const bool active =
        a >= 0.0 ? r < 1.0 + config.clip_ratio : r > 1.0 - config.clip_ratio;
    if (active) dlogp[k] = -a * r / mb;
    terms.approx_kl += (r - 1.0) - logratio[k];
    if (std::abs(r - 1.0) > config.clip_ratio) terms.clip_fraction += 1.0;
  }
  terms.policy_loss /= mb;
  terms.approx_kl /= mb;
  terms.clip_fraction /= mb;

  const Eigen::ArrayXd verr = value.array() - returns.array();
  terms.value_mse = verr.square().mean();
  terms.entropy = gaussian_entropy(params.log_std);
  terms.total = terms.policy_loss + config.value_coef * terms.value_mse -
                config.entropy_coef * terms.entropy;

  if (grads) {
    Eigen::MatrixXd dmean(act_dim, mb);
    for (int k = 0; k < mb; ++k)
      dmean.col(k) = dlogp[k] * (z.col(k).array() / sigma).matrix();

    Eigen::VectorXd dlog_std = Eigen::VectorXd::Zero(act_dim);
    for (int k = 0; k < mb; ++k)
      dlog_std += dlogp[k] * (z.col(k).array().square() - 1.0).matrix();
    dlog_std.array() -= config.entropy_coef;  // d(-c_e entropy)/d(log_std)

    Eigen::MatrixXd dvalue(1, mb);
    dvalue.row(0) = (2.0 * config.value_coef / mb) * verr.matrix().transpose();

    params.actor.backward(actor_ws, dmean, grads->actor);
    params.critic.backward(critic_ws, dvalue, grads->critic);
    grads->log_std += dlog_std;
  }
  return terms;
}

UpdateDiagnostics ppo_update(PolicyParams& params, AdamState& optimizer,
                             RolloutBatch& batch, const PpoConfig& config,
                             RandomEngine& rng) {
  const int n = batch.size();
  const int act_dim = params.act_dim();

  // advantage normalization over the whole batch
  const double adv_mean = batch.advantages.mean();
  const double adv_std =
      std::sqrt((batch.advantages.array() - adv_mean).square().sum() / n);
  batch.advantages = (batch.advantages.array() - adv_mean) / (adv_std + 1e-8);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateDiagnostics diag;
  int minibatches = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.raw());

    for (int start = 0; start + config.minibatch_size <= n;
         start += config.minibatch_size) {
      const int mb = config.minibatch_size;

      Eigen::MatrixXd obs(params.obs_dim(), mb);
      Eigen::MatrixXd act(act_dim, mb);
      Eigen::VectorXd logp_old(mb), adv(mb), ret(mb);
      for (int k = 0; k < mb; ++k) {
        const int i = order[start + k];
        obs.col(k) = batch.observations.col(i);
        act.col(k) = batch.actions.col(i);
        logp_old[k] = batch.log_probs[i];
        adv[k] = batch.advantages[i];
        ret[k] = batch.returns[i];
      }

      GradientBuffer grads = GradientBuffer::zeros(params);
      const PpoLossTerms terms =
          ppo_minibatch_loss(params, obs, act, logp_old, adv, ret, config, &grads);
      if (!std::isfinite(terms.total)) {
        diag.aborted = true;
        diag.policy_loss = terms.policy_loss;
        diag.value_loss = terms.value_mse;
        diag.entropy = terms.entropy;
        return diag;
      }

      Eigen::VectorXd flat_grad = grads.flatten();
      const double norm = flat_grad.norm();
      if (norm > config.grad_clip) flat_grad *= config.grad_clip / norm;

      Eigen::VectorXd theta = params.flatten();
      optimizer.apply(theta, flat_grad, config.learning_rate);
      params.unflatten(theta);
      params.clamp_log_std();

      diag.policy_loss += terms.policy_loss;
      diag.value_loss += terms.value_mse;
      diag.entropy += terms.entropy;
      diag.approx_kl += terms.approx_kl;
      diag.clip_fraction += terms.clip_fraction;
      diag.grad_norm += norm;
      ++minibatches;
    }
  }

  if (minibatches > 0) {
    diag.policy_loss /= minibatches;
    diag.value_loss /= minibatches;
    diag.entropy /= minibatches;
    diag.approx_kl /= minibatches;
    diag.clip_fraction /= minibatches;
    diag.grad_norm /= minibatches;
  }
  return diag;
}

PolicyParams initial_locomotion_policy(Task task, const DemoTrajectory& demo,
                                       const PpoConfig& config) {
  RandomEngine rng(config.seed);
  PolicyParams params = PolicyParams::create(observation_dim(task), kNumJoints, rng,
                                             64, config.log_std_init);
  params.actor.biases.back() = demo.mean_joint_posture();
  return params;
}

namespace {

struct TrainerState {
  long long next_update = 0;
  long long env_steps = 0;
  std::string trainer_rng;
  std::vector<std::string> env_rngs;
};

void save_trainer_state(const TrainerState& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "locoforge-trainer v1 next_update=" << s.next_update
     << " env_steps=" << s.env_steps << " envs=" << s.env_rngs.size() << "\n";
  os << s.trainer_rng << "\n";
  for (const auto& r : s.env_rngs) os << r << "\n";
  if (!os) throw std::runtime_error("write failed for " + path);
}

TrainerState load_trainer_state(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(is, header);
  TrainerState s;
  long long envs = 0;
  if (std::sscanf(header.c_str(),
                  "locoforge-trainer v1 next_update=%lld env_steps=%lld envs=%lld",
                  &s.next_update, &s.env_steps, &envs) != 3)
    throw std::runtime_error("bad trainer state header in " + path);
  if (!std::getline(is, s.trainer_rng))
    throw std::runtime_error("truncated trainer state " + path);
  for (long long i = 0; i < envs; ++i) {
    std::string line;
    if (!std::getline(is, line))
      throw std::runtime_error("truncated trainer state " + path);
    s.env_rngs.push_back(line);
  }
  return s;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double mean_of(const std::vector<int>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

constexpr const char* kLogHeader =
    "update,env_steps,episodes,mean_return,mean_ep_len,"
    "r_tt,r_ti,r_hp,r_ps,r_ct,r_ts,r_bn,r_cc,"
    "pg_loss,v_loss,entropy,approx_kl,clip_frac,grad_norm,log_std_mean";

}  // namespace

TrainResult train_stage(const TrainStageOptions& options) {
  options.ppo.validate();
  options.env_config.validate();
  if (options.stage != 1 && options.stage != 2)
    throw std::invalid_argument("train_stage: stage must be 1 or 2");
  if (options.stage == 2 && !options.initial_params && !options.resume)
    throw std::invalid_argument("train_stage: stage 2 requires a stage-1 checkpoint");

  fs::create_directories(options.out_dir);
  const std::string log_path = options.out_dir + "/log.csv";
  const std::string policy_latest = options.out_dir + "/checkpoint_latest.txt";
  const std::string adam_latest = options.out_dir + "/optimizer_latest.txt";
  const std::string trainer_latest = options.out_dir + "/trainer_latest.txt";

  EnvConfig env_cfg = options.env_config;
  env_cfg.task = options.task;
  env_cfg.stage = options.stage;

  const int env_count = options.ppo.env_count;
  std::vector<std::unique_ptr<RolloutEnv>> envs;
  envs.reserve(env_count);
  for (int i = 0; i < env_count; ++i)
    envs.push_back(std::make_unique<LocomotionRolloutEnv>(
        Env(options.model, options.gains, options.ground, options.weights,
            options.demo, env_cfg)));

  std::vector<RandomEngine> rngs;
  rngs.reserve(env_count);
  for (int i = 0; i < env_count; ++i) rngs.emplace_back(options.ppo.seed + 1 + i);
  RandomEngine update_rng(options.ppo.seed + 1 + env_count);

  PolicyParams params;
  AdamState adam;
  long long first_update = 0;
  long long env_steps = 0;

  if (options.resume) {
    if (!fs::exists(trainer_latest))
      throw std::runtime_error("train_stage: no checkpoint to resume in " + options.out_dir);
    const TrainerState ts = load_trainer_state(trainer_latest);
    if (static_cast<int>(ts.env_rngs.size()) != env_count)
      throw std::runtime_error("train_stage: resume env count mismatch");
    params = load_policy(policy_latest);
    adam = AdamState::load(adam_latest);
    update_rng.restore_state(ts.trainer_rng);
    for (int i = 0; i < env_count; ++i) rngs[i].restore_state(ts.env_rngs[i]);
    first_update = ts.next_update;
    env_steps = ts.env_steps;
  } else {
    if (options.stage == 2) {
      params = *options.initial_params;
      // restore exploration for the new objective
      params.log_std.setConstant(options.ppo.log_std_init);
    } else if (options.initial_params) {
      params = *options.initial_params;
    } else {
      params = initial_locomotion_policy(options.task, options.demo, options.ppo);
    }
    adam = AdamState::zeros(params.parameter_count());
  }

  std::ofstream log(log_path, options.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("train_stage: cannot open " + log_path);
  if (!options.resume) log << kLogHeader << "\n";

  std::vector<RolloutCarry> carries(env_count);
  RolloutBatch batch = RolloutBatch::allocate(observation_dim(options.task), kNumJoints,
                                              options.ppo.batch_size());

  char buf[64];
  auto put = [&](std::ofstream& os, double v, bool first = false) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (!first) os << ",";
    os << buf;
  };

  const long long total = options.ppo.total_updates;
  for (long long u = first_update; u < total; ++u) {
    // fresh episodes at every checkpoint boundary keep resumed runs bit-exact
    if (u % options.ppo.checkpoint_interval == 0)
      for (auto& carry : carries) carry.has_obs = false;

    const CollectStats stats =
        collect_rollouts(envs, params, options.ppo.horizon, rngs, carries, batch,
                         options.workers);
    env_steps += stats.steps;

    compute_gae(batch, options.ppo.gamma, options.ppo.gae_lambda, options.ppo.horizon);
    const UpdateDiagnostics diag = ppo_update(params, adam, batch, options.ppo, update_rng);
    if (diag.aborted)
      throw std::runtime_error("train_stage: update aborted on non-finite loss at update " +
                               std::to_string(u));

    const double inv_steps = 1.0 / stats.steps;
    log << (u + 1);
    put(log, static_cast<double>(env_steps));
    put(log, static_cast<double>(stats.episode_returns.size()));
    put(log, mean_of(stats.episode_returns));
    put(log, mean_of(stats.episode_lengths));
    put(log, stats.term_sums.tt * inv_steps);
    put(log, stats.term_sums.ti * inv_steps);
    put(log, stats.term_sums.hp * inv_steps);
    put(log, stats.term_sums.ps * inv_steps);
    put(log, stats.term_sums.ct * inv_steps);
    put(log, stats.term_sums.ts * inv_steps);
    put(log, stats.term_sums.bn * inv_steps);
    put(log, stats.term_sums.cc * inv_steps);
    put(log, diag.policy_loss);
    put(log, diag.value_loss);
    put(log, diag.entropy);
    put(log, diag.approx_kl);
    put(log, diag.clip_fraction);
    put(log, diag.grad_norm);
    put(log, params.log_std.mean());
    log << "\n";
    log.flush();

    const bool boundary = (u + 1) % options.ppo.checkpoint_interval == 0 || u + 1 == total;
    if (boundary) {
      save_policy(params, policy_latest);
      save_policy(params, options.out_dir + "/checkpoint_" + std::to_string(u + 1) + ".txt");
      adam.save(adam_latest);
      TrainerState ts;
      ts.next_update = u + 1;
      ts.env_steps = env_steps;
      ts.trainer_rng = update_rng.save_state();
      for (auto& r : rngs) ts.env_rngs.push_back(r.save_state());
      save_trainer_state(ts, trainer_latest);
    }
  }

  TrainResult result;
  result.final_checkpoint = options.out_dir + "/policy_final.txt";
  save_policy(params, result.final_checkpoint);
  result.params = std::move(params);
  result.updates_run = static_cast<int>(total - first_update);
  return result;
}

}  // namespace locoforge
