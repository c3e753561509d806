#pragma once

#include <vector>

#include <Eigen/Core>

#include "pmatch/rng.hpp"

namespace pmatch {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer& other) const {
    return weight.rows() == other.weight.rows() && weight.cols() == other.weight.cols() &&
           weight == other.weight && bias == other.bias;
  }
};

/// Fully connected ReLU network operating on column batches (features x samples).
/// ReLU follows every layer except the last, unless relu_output is set.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [input, layer1 out, ..., layerL out]
  };

  struct Gradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    double squared_norm() const;
  };

  Mlp() = default;
  /// He-normal weights, zero biases. dims = {in, hidden..., out}.
  Mlp(const std::vector<int>& dims, bool relu_output, Rng& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_output, Gradient& grad) const;

  Gradient zero_gradient() const;
  void apply_gradient(const Gradient& grad, double learning_rate);

  int input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }
  bool relu_output() const { return relu_output_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  void set_relu_output(bool value) { relu_output_ = value; }

  bool all_finite() const;
  bool operator==(const Mlp&) const = default;

 private:
  bool relu_after(std::size_t layer) const { return layer + 1 < layers_.size() || relu_output_; }

  std::vector<DenseLayer> layers_;
  bool relu_output_ = false;
};

}  // namespace pmatch
