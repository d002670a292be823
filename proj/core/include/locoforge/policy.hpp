#pragma once

#include <string>
#include <utility>

#include "locoforge/mlp.hpp"

namespace locoforge {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Gaussian MLP actor (state-independent log-std) plus a value network.
struct PolicyParams {
  Mlp actor;           // obs_dim -> 64 -> 64 -> act_dim
  Mlp critic;          // obs_dim -> 64 -> 64 -> 1
  VectorXd log_std;    // act_dim

  static PolicyParams create(int obs_dim, int act_dim, RandomEngine& rng,
                             int hidden = 64, double log_std_init = -1.0);

  int obs_dim() const { return actor.input_dim(); }
  int act_dim() const { return actor.output_dim(); }
  int parameter_count() const;

  void clamp_log_std();

  // Flat canonical order: actor, log_std, critic.
  VectorXd flatten() const;
  void unflatten(const VectorXd& flat);
};

struct GradientBuffer {
  Mlp::Gradient actor;
  Mlp::Gradient critic;
  VectorXd log_std;

  static GradientBuffer zeros(const PolicyParams& params);
  void setZero();
  VectorXd flatten() const;
  double global_norm() const;
};

VectorXd actor_forward(const PolicyParams& params, const VectorXd& obs);
double critic_value(const PolicyParams& params, const VectorXd& obs);

// Diagonal Gaussian log density of action under mean/log_std.
double gaussian_log_prob(const VectorXd& mean, const VectorXd& log_std,
                         const VectorXd& action);
// Entropy of the diagonal Gaussian (independent of the mean).
double gaussian_entropy(const VectorXd& log_std);

// action = mean + exp(log_std) * xi, xi ~ N(0, I); returns exact log density.
std::pair<VectorXd, double> sample_action(const PolicyParams& params,
                                          const VectorXd& obs, RandomEngine& rng);

// Checkpoint text format: one header line, then one parameter per line in
// the canonical flat order. Round-trips bit-exactly.
void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

}  // namespace locoforge
