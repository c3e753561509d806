#include "pmatch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {

void ProbeConfig::validate() const {
  if (fractions.empty()) throw Error(ErrorCode::ConfigError, "need at least one label fraction");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::ConfigError, "label fractions must lie in (0, 1]");
  if (epochs < 0) throw Error(ErrorCode::ConfigError, "probe epochs must be non-negative");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0))
    throw Error(ErrorCode::ConfigError, "probe learning rate and weight decay must be non-negative");
}

std::vector<std::size_t> stratified_subset(std::span<const int> labels, double fraction, std::uint64_t seed,
                                           int num_classes) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::ConfigError, "fraction must lie in (0, 1]");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (int c = 0; c < num_classes; ++c)
    if (!by_class.count(c)) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no samples");

  std::vector<std::size_t> out;
  for (auto& [label, members] : by_class) {
    const auto n = members.size();
    const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    std::shuffle(members.begin(), members.end(), rng);
    out.insert(out.end(), members.begin(), members.begin() + std::min(take, n));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd LinearClassifier::probabilities(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd x = inv_scale.asDiagonal() * (features.colwise() - mean);
  Eigen::MatrixXd logits = weight * x;
  logits.colwise() += bias;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double peak = logits.col(j).maxCoeff();
    logits.col(j) = (logits.col(j).array() - peak).exp();
    logits.col(j) /= logits.col(j).sum();
  }
  return logits;
}

std::vector<int> LinearClassifier::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd p = probabilities(features);
  std::vector<int> out(p.cols());
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::Index best = 0;
    p.col(j).maxCoeff(&best);
    out[j] = static_cast<int>(best);
  }
  return out;
}

LinearClassifier train_probe(const Eigen::MatrixXd& features, std::span<const int> labels, int num_classes,
                             const ProbeConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(features.cols()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, "one label per feature column required");
  if (features.cols() == 0) throw Error(ErrorCode::EmptyClass, "probe needs training samples");
  if (!features.allFinite()) throw Error(ErrorCode::DivergenceDetected, "non-finite probe features");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::ConfigError, "label out of range");

  const Eigen::Index d = features.rows();
  const Eigen::Index n = features.cols();
  LinearClassifier clf;
  clf.mean = features.rowwise().mean();
  const Eigen::MatrixXd centered = features.colwise() - clf.mean;
  const Eigen::VectorXd stddev = (centered.array().square().rowwise().sum() / static_cast<double>(n)).sqrt();
  clf.inv_scale = stddev.unaryExpr([](double s) { return s > 1e-8 ? 1.0 / s : 0.0; });
  const Eigen::MatrixXd x = clf.inv_scale.asDiagonal() * centered;
  clf.weight = Eigen::MatrixXd::Zero(num_classes, d);
  clf.bias = Eigen::VectorXd::Zero(num_classes);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(num_classes, n);
  for (Eigen::Index j = 0; j < n; ++j) onehot(labels[j], j) = 1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Eigen::MatrixXd logits = clf.weight * x;
    logits.colwise() += clf.bias;
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double peak = logits.col(j).maxCoeff();
      logits.col(j) = (logits.col(j).array() - peak).exp();
      const double z = logits.col(j).sum();
      logits.col(j) /= z;
      loss -= std::log(std::max(logits(labels[j], j), std::numeric_limits<double>::min()));
    }
    if (!std::isfinite(loss)) throw Error(ErrorCode::DivergenceDetected, "non-finite probe loss");
    const Eigen::MatrixXd residual = (logits - onehot) / static_cast<double>(n);
    clf.weight -= config.learning_rate * (residual * x.transpose() + config.weight_decay * clf.weight);
    clf.bias -= config.learning_rate * residual.rowwise().sum();
  }
  return clf;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  if (predictions.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  if (labels.empty()) throw Error(ErrorCode::LengthMismatch, "no labels to score");
  Metrics m;
  m.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes)
      throw Error(ErrorCode::ConfigError, "class index out of range");
    ++m.confusion(labels[i], predictions[i]);
  }
  m.top1 = 100.0 * m.confusion.trace() / static_cast<double>(labels.size());
  double recall_sum = 0.0;
  int present = 0;
  m.per_class_recall.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < num_classes; ++c) {
    const int row = m.confusion.row(c).sum();
    if (row == 0) continue;
    m.per_class_recall[c] = 100.0 * m.confusion(c, c) / static_cast<double>(row);
    recall_sum += m.per_class_recall[c];
    ++present;
  }
  m.balanced_top1 = recall_sum / present;
  return m;
}

double EvalCell::mean_top1() const {
  if (per_seed.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : per_seed) s += m.top1;
  return s / per_seed.size();
}

double EvalCell::mean_balanced_top1() const {
  if (per_seed.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : per_seed) s += m.balanced_top1;
  return s / per_seed.size();
}

const EvalCell* EvalReport::find(const std::string& method, const std::string& regime, double fraction) const {
  for (const auto& c : cells)
    if (c.method == method && c.regime == regime && std::abs(c.fraction - fraction) < 1e-12) return &c;
  return nullptr;
}

std::vector<double> EvalReport::fractions() const {
  std::vector<double> out;
  for (const auto& c : cells)
    if (std::none_of(out.begin(), out.end(), [&](double f) { return std::abs(f - c.fraction) < 1e-12; }))
      out.push_back(c.fraction);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<std::string, std::string>> EvalReport::rows() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : cells) {
    std::pair<std::string, std::string> row{c.method, c.regime};
    if (std::find(out.begin(), out.end(), row) == out.end()) out.push_back(row);
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cell;
    cell["method"] = c.method;
    cell["regime"] = c.regime;
    cell["fraction"] = c.fraction;
    cell["seeds"] = c.seeds;
    cell["mean_top1"] = c.mean_top1();
    cell["mean_balanced_top1"] = c.mean_balanced_top1();
    auto& runs = cell["runs"] = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < c.per_seed.size(); ++s) {
      const Metrics& m = c.per_seed[s];
      nlohmann::ordered_json run;
      run["seed"] = c.seeds[s];
      run["top1"] = m.top1;
      run["balanced_top1"] = m.balanced_top1;
      auto& recalls = run["per_class_recall"] = nlohmann::ordered_json::array();
      for (double r : m.per_class_recall) recalls.push_back(std::isnan(r) ? nlohmann::ordered_json() : nlohmann::ordered_json(r));
      auto& confusion = run["confusion"] = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
        std::vector<int> row(m.confusion.cols());
        for (Eigen::Index k = 0; k < m.confusion.cols(); ++k) row[k] = m.confusion(r, k);
        confusion.push_back(row);
      }
      runs.push_back(std::move(run));
    }
    j["cells"].push_back(std::move(cell));
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::format_table() const {
  const auto fracs = fractions();
  std::ostringstream os;
  char buf[64];
  for (int pass = 0; pass < 2; ++pass) {
    os << (pass == 0 ? "Top-1 Accuracy" : "Balanced Top-1 Accuracy") << "\n";
    os << "method   positives ";
    for (double f : fracs) {
      std::snprintf(buf, sizeof(buf), " %7.0f%%", 100.0 * f);
      os << buf;
    }
    os << "\n";
    for (const auto& [method, regime] : rows()) {
      std::snprintf(buf, sizeof(buf), "%-8s %-9s ", method.c_str(), regime.c_str());
      os << buf;
      for (double f : fracs) {
        const EvalCell* c = find(method, regime, f);
        if (c) {
          std::snprintf(buf, sizeof(buf), " %8.2f", pass == 0 ? c->mean_top1() : c->mean_balanced_top1());
        } else {
          std::snprintf(buf, sizeof(buf), " %8s", "-");
        }
        os << buf;
      }
      os << "\n";
    }
    if (pass == 0) os << "\n";
  }
  return os.str();
}

}  // namespace pmatch
