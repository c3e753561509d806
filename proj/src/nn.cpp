#include "pmatch/nn.hpp"

#include <cmath>

#include "pmatch/error.hpp"

namespace pmatch {

double Mlp::Gradient::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weight) s += w.squaredNorm();
  for (const auto& b : bias) s += b.squaredNorm();
  return s;
}

Mlp::Mlp(const std::vector<int>& dims, bool relu_output, Rng& rng) : relu_output_(relu_output) {
  if (dims.size() < 2) throw Error(ErrorCode::ConfigError, "an MLP needs at least input and output dims");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] <= 0 || dims[l + 1] <= 0) throw Error(ErrorCode::ConfigError, "layer dims must be positive");
    DenseLayer layer;
    layer.weight.resize(dims[l + 1], dims[l]);
    const double scale = std::sqrt(2.0 / dims[l]);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = scale * normal(rng);
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    layers_.push_back(std::move(layer));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != input_dim()) throw Error(ErrorCode::DimensionMismatch, "MLP input has wrong dimension");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (relu_after(l)) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output, Gradient& grad) const {
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (relu_after(l)) delta.array() *= (cache.activations[l + 1].array() > 0.0).cast<double>();
    grad.weight[l].noalias() += delta * cache.activations[l].transpose();
    grad.bias[l] += delta.rowwise().sum();
    delta = layers_[l].weight.transpose() * delta;
  }
  return delta;
}

Mlp::Gradient Mlp::zero_gradient() const {
  Gradient g;
  for (const auto& layer : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

void Mlp::apply_gradient(const Gradient& grad, double learning_rate) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight -= learning_rate * grad.weight[l];
    layers_[l].bias -= learning_rate * grad.bias[l];
  }
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_)
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

}  // namespace pmatch
