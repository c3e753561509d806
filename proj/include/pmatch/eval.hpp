#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pmatch {

struct ProbeConfig {
  std::vector<double> fractions{0.01, 0.10, 1.00};
  int epochs = 300;
  double learning_rate = 0.5;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per class: max(1, round(fraction * count)) indices, sorted ascending.
/// When num_classes > 0 every class in [0, num_classes) must occur
/// (EmptyClass otherwise).
std::vector<std::size_t> stratified_subset(std::span<const int> labels, double fraction, std::uint64_t seed,
                                           int num_classes = 0);

/// Multinomial logistic regression on standardized features.
struct LinearClassifier {
  Eigen::MatrixXd weight;  // classes x features
  Eigen::VectorXd bias;
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_scale;

  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& features) const;
  std::vector<int> predict(const Eigen::MatrixXd& features) const;
};

/// Full-batch gradient descent from zero weights; the feature matrix is
/// only read. Throws DivergenceDetected on a non-finite loss.
LinearClassifier train_probe(const Eigen::MatrixXd& features, std::span<const int> labels, int num_classes,
                             const ProbeConfig& config);

struct Metrics {
  double top1 = 0.0;           // percent
  double balanced_top1 = 0.0;  // percent, mean recall over classes present in labels
  Eigen::MatrixXi confusion;   // rows = true class, cols = predicted class
  std::vector<double> per_class_recall;  // percent, NaN for classes absent from labels
};

/// Throws LengthMismatch.
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes);

struct EvalCell {
  std::string method;
  std::string regime;
  double fraction = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;

  double mean_top1() const;
  double mean_balanced_top1() const;
};

struct EvalReport {
  std::vector<EvalCell> cells;

  const EvalCell* find(const std::string& method, const std::string& regime, double fraction) const;
  std::vector<double> fractions() const;
  std::vector<std::pair<std::string, std::string>> rows() const;

  std::string to_json() const;
  /// Two text tables (Top-1, Balanced Top-1): rows method x regime, columns fractions.
  std::string format_table() const;
};

}  // namespace pmatch
