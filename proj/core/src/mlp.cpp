#include "locoforge/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace locoforge {

Mlp Mlp::zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least two dims");
  Mlp net;
  net.dims = dims;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    net.weights.emplace_back(MatrixXd::Zero(dims[l + 1], dims[l]));
    net.biases.emplace_back(VectorXd::Zero(dims[l + 1]));
  }
  return net;
}

Mlp Mlp::random_init(const std::vector<int>& dims, RandomEngine& rng) {
  Mlp net = zeros(dims);
  for (auto& w : net.weights) {
    const double bound = std::sqrt(6.0 / (w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return net;
}

int Mlp::parameter_count() const {
  int n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += static_cast<int>(weights[l].size() + biases[l].size());
  return n;
}

MatrixXd Mlp::forward(const MatrixXd& input, Workspace* ws) const {
  if (input.rows() != input_dim())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  if (ws) {
    ws->activations.assign(1, input);
    ws->activations.reserve(layer_count() + 1);
  }
  MatrixXd a = input;
  for (int l = 0; l < layer_count(); ++l) {
    MatrixXd z = (weights[l] * a).colwise() + biases[l];
    if (l + 1 < layer_count()) z = z.array().tanh();
    a = std::move(z);
    if (ws) ws->activations.push_back(a);
  }
  return a;
}

VectorXd Mlp::forward_single(const VectorXd& input) const {
  return forward(MatrixXd(input)).col(0);
}

void Mlp::Gradient::setZero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

Mlp::Gradient Mlp::zero_gradient() const {
  Gradient g;
  for (int l = 0; l < layer_count(); ++l) {
    g.weights.emplace_back(MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
    g.biases.emplace_back(VectorXd::Zero(biases[l].size()));
  }
  return g;
}

void Mlp::backward(const Workspace& ws, const MatrixXd& output_grad,
                   Gradient& grad) const {
  const int layers = layer_count();
  if (static_cast<int>(ws.activations.size()) != layers + 1)
    throw std::invalid_argument("Mlp::backward: workspace does not match forward");
  if (output_grad.rows() != output_dim() ||
      output_grad.cols() != ws.activations[0].cols())
    throw std::invalid_argument("Mlp::backward: output gradient shape mismatch");

  MatrixXd delta = output_grad;  // d loss / d preactivation of layer l
  for (int l = layers - 1; l >= 0; --l) {
    grad.weights[l].noalias() += delta * ws.activations[l].transpose();
    grad.biases[l] += delta.rowwise().sum();
    if (l > 0) {
      // through tanh: a = tanh(z) => dz = da (1 - a^2)
      MatrixXd da = weights[l].transpose() * delta;
      delta = da.array() * (1.0 - ws.activations[l].array().square());
    }
  }
}

void Mlp::flatten_to(double* out) const {
  for (int l = 0; l < layer_count(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) *out++ = weights[l](i, j);
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) *out++ = biases[l][i];
  }
}

void Mlp::unflatten_from(const double* in) {
  for (int l = 0; l < layer_count(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = *in++;
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l][i] = *in++;
  }
}

void Mlp::flatten_gradient(const Gradient& grad, double* out) {
  for (size_t l = 0; l < grad.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < grad.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < grad.weights[l].cols(); ++j)
        *out++ = grad.weights[l](i, j);
    for (Eigen::Index i = 0; i < grad.biases[l].size(); ++i) *out++ = grad.biases[l][i];
  }
}

}  // namespace locoforge
