#pragma once

#include <Eigen/Dense>
#include <vector>

#include "locoforge/rng.hpp"

namespace locoforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Dense multilayer perceptron, tanh hidden activations, linear output.
// Forward/backward are hand-rolled; batches are column-major (one sample
// per column).
struct Mlp {
  std::vector<int> dims;        // {in, hidden..., out}
  std::vector<MatrixXd> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<VectorXd> biases;

  static Mlp zeros(const std::vector<int>& dims);
  // Xavier-uniform weights, zero biases.
  static Mlp random_init(const std::vector<int>& dims, RandomEngine& rng);

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  int parameter_count() const;

  // Activations cached by forward() for a later backward().
  struct Workspace {
    std::vector<MatrixXd> activations;  // activations[0] = input, ..., [L] = output
  };

  MatrixXd forward(const MatrixXd& input, Workspace* ws = nullptr) const;
  VectorXd forward_single(const VectorXd& input) const;

  struct Gradient {
    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;

    void setZero();
  };
  Gradient zero_gradient() const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output) for the
  // batch that produced ws. Returns nothing; upstream input gradients are not
  // needed by any caller.
  void backward(const Workspace& ws, const MatrixXd& output_grad, Gradient& grad) const;

  // Canonical flat order: per layer, weights row-major, then biases.
  void flatten_to(double* out) const;
  void unflatten_from(const double* in);
  static void flatten_gradient(const Gradient& grad, double* out);
};

}  // namespace locoforge
