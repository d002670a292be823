#include "locoforge/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace locoforge {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

PolicyParams PolicyParams::create(int obs_dim, int act_dim, RandomEngine& rng,
                                  int hidden, double log_std_init) {
  PolicyParams p;
  p.actor = Mlp::random_init({obs_dim, hidden, hidden, act_dim}, rng);
  p.critic = Mlp::random_init({obs_dim, hidden, hidden, 1}, rng);
  p.log_std = VectorXd::Constant(act_dim, log_std_init);
  return p;
}

int PolicyParams::parameter_count() const {
  return actor.parameter_count() + static_cast<int>(log_std.size()) +
         critic.parameter_count();
}

void PolicyParams::clamp_log_std() {
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

VectorXd PolicyParams::flatten() const {
  VectorXd flat(parameter_count());
  double* out = flat.data();
  actor.flatten_to(out);
  out += actor.parameter_count();
  for (Eigen::Index i = 0; i < log_std.size(); ++i) *out++ = log_std[i];
  critic.flatten_to(out);
  return flat;
}

void PolicyParams::unflatten(const VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("PolicyParams::unflatten: size mismatch");
  const double* in = flat.data();
  actor.unflatten_from(in);
  in += actor.parameter_count();
  for (Eigen::Index i = 0; i < log_std.size(); ++i) log_std[i] = *in++;
  critic.unflatten_from(in);
}

GradientBuffer GradientBuffer::zeros(const PolicyParams& params) {
  GradientBuffer g;
  g.actor = params.actor.zero_gradient();
  g.critic = params.critic.zero_gradient();
  g.log_std = VectorXd::Zero(params.log_std.size());
  return g;
}

void GradientBuffer::setZero() {
  actor.setZero();
  critic.setZero();
  log_std.setZero();
}

VectorXd GradientBuffer::flatten() const {
  int actor_count = 0, critic_count = 0;
  for (size_t l = 0; l < actor.weights.size(); ++l)
    actor_count += static_cast<int>(actor.weights[l].size() + actor.biases[l].size());
  for (size_t l = 0; l < critic.weights.size(); ++l)
    critic_count += static_cast<int>(critic.weights[l].size() + critic.biases[l].size());
  VectorXd flat(actor_count + log_std.size() + critic_count);
  double* out = flat.data();
  Mlp::flatten_gradient(actor, out);
  out += actor_count;
  for (Eigen::Index i = 0; i < log_std.size(); ++i) *out++ = log_std[i];
  Mlp::flatten_gradient(critic, out);
  return flat;
}

double GradientBuffer::global_norm() const { return flatten().norm(); }

VectorXd actor_forward(const PolicyParams& params, const VectorXd& obs) {
  return params.actor.forward_single(obs);
}

double critic_value(const PolicyParams& params, const VectorXd& obs) {
  return params.critic.forward_single(obs)[0];
}

double gaussian_log_prob(const VectorXd& mean, const VectorXd& log_std,
                         const VectorXd& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double std = std::exp(log_std[i]);
    const double z = (action[i] - mean[i]) / std;
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

double gaussian_entropy(const VectorXd& log_std) {
  return log_std.sum() + 0.5 * log_std.size() * (1.0 + kLog2Pi);
}

std::pair<VectorXd, double> sample_action(const PolicyParams& params,
                                          const VectorXd& obs, RandomEngine& rng) {
  const VectorXd mean = actor_forward(params, obs);
  VectorXd action(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    action[i] = mean[i] + std::exp(params.log_std[i]) * rng.normal();
  return {action, gaussian_log_prob(mean, params.log_std, action)};
}

namespace {

void write_dims(std::ostream& os, const Mlp& net) {
  for (size_t i = 1; i + 1 < net.dims.size(); ++i)
    os << (i > 1 ? "," : "") << net.dims[i];
}

}  // namespace

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_policy: cannot open " + path);
  os << "locoforge-policy v1 obs=" << params.obs_dim() << " act=" << params.act_dim()
     << " hidden=";
  write_dims(os, params.actor);
  os << "\n";
  const VectorXd flat = params.flatten();
  char buf[32];
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", flat[i]);
    os << buf << "\n";
  }
  if (!os) throw std::runtime_error("save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_policy: cannot open " + path);
  std::string header;
  std::getline(is, header);
  int obs_dim = 0, act_dim = 0;
  char hidden_spec[64] = {0};
  if (std::sscanf(header.c_str(), "locoforge-policy v1 obs=%d act=%d hidden=%63s",
                  &obs_dim, &act_dim, hidden_spec) != 3)
    throw std::runtime_error("load_policy: bad header in " + path);

  std::vector<int> hidden;
  std::stringstream hs(hidden_spec);
  for (std::string tok; std::getline(hs, tok, ',');) hidden.push_back(std::stoi(tok));
  if (obs_dim <= 0 || act_dim <= 0 || hidden.empty())
    throw std::runtime_error("load_policy: invalid dimensions in " + path);

  std::vector<int> actor_dims = {obs_dim};
  std::vector<int> critic_dims = {obs_dim};
  for (int h : hidden) {
    actor_dims.push_back(h);
    critic_dims.push_back(h);
  }
  actor_dims.push_back(act_dim);
  critic_dims.push_back(1);

  PolicyParams p;
  p.actor = Mlp::zeros(actor_dims);
  p.critic = Mlp::zeros(critic_dims);
  p.log_std = VectorXd::Zero(act_dim);

  VectorXd flat(p.parameter_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    if (!(is >> flat[i]))
      throw std::runtime_error("load_policy: truncated parameter list in " + path);
  }
  double extra;
  if (is >> extra) throw std::runtime_error("load_policy: trailing data in " + path);
  p.unflatten(flat);
  return p;
}

}  // namespace locoforge
