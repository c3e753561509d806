#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pmatch/miner.hpp"
#include "pmatch/nn.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {

enum class Method { SimClr, SimSiam, Triplet };
enum class PositiveRegime { Standard, Polygon };

std::string_view to_string(Method method);
std::string_view to_string(PositiveRegime regime);
Method parse_method(std::string_view text);           // throws ConfigError
PositiveRegime parse_regime(std::string_view text);   // throws ConfigError

/// Feature-space stand-ins for crop / flip / color distortion.
struct AugmentationPolicy {
  double jitter = 0.1;       // per-channel multiplicative scale noise
  double noise_sigma = 0.1;  // additive gaussian noise
  double dropout = 0.1;      // probability of zeroing a coordinate

  void validate() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x, Rng& rng) const;
};

struct EncoderConfig {
  int input_dim = 16;
  int hidden_dim = 32;
  int feature_dim = 32;
  int projector_hidden = 32;
  int embedding_dim = 8;
  int predictor_hidden = 32;

  void validate() const;
};

/// f: raw -> features (probed), g: features -> z (losses), h: z -> p (SimSiam).
struct EncoderStack {
  Mlp f;
  Mlp g;
  Mlp h;

  static EncoderStack create(const EncoderConfig& config, std::uint64_t seed);

  Eigen::MatrixXd features(const Eigen::MatrixXd& raw) const { return f.forward(raw); }
  Eigen::MatrixXd embed(const Eigen::MatrixXd& raw) const { return g.forward(f.forward(raw)); }
  bool all_finite() const { return f.all_finite() && g.all_finite() && h.all_finite(); }
  bool operator==(const EncoderStack&) const = default;
};

struct TrainConfig {
  Method method = Method::SimClr;
  PositiveRegime positives = PositiveRegime::Standard;
  double temperature = 0.5;
  double margin = 1.0;
  int batch_size = 64;
  int epochs = 20;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  bool eq1_literal = false;  // exp(-sim/tau) in the NT-Xent denominator
  AugmentationPolicy augment;
  EncoderConfig encoder;

  void validate() const;
};

/// Raw view features, one column per observation.
class SslDataset {
 public:
  SslDataset() = default;
  SslDataset(std::vector<ObservationKey> keys, Eigen::MatrixXd features);

  const std::vector<ObservationKey>& keys() const { return keys_; }
  const Eigen::MatrixXd& features() const { return features_; }
  Eigen::Index size() const { return features_.cols(); }
  int dim() const { return static_cast<int>(features_.rows()); }

  std::optional<Eigen::Index> find(const ObservationKey& key) const;
  /// Throws UnknownQuery.
  Eigen::Index index_of(const ObservationKey& key) const;

 private:
  std::vector<ObservationKey> keys_;
  Eigen::MatrixXd features_;
  std::map<ObservationKey, Eigen::Index> index_;
};

struct ViewPair {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  std::optional<ObservationKey> partner;  // set when the second view came from a mined positive
};

/// Standard: two augmentations of the query. Polygon: the second view comes
/// from a uniformly sampled mined positive, falling back to standard when the
/// query has no candidates. Throws UnknownQuery.
ViewPair make_pair(const ObservationKey& query, PositiveRegime regime, const PairManifest* manifest,
                   const SslDataset& dataset, const AugmentationPolicy& policy, Rng& rng);

struct TrainResult {
  EncoderStack encoder;
  std::vector<double> loss_curve;  // mean loss per epoch
  double initial_loss = 0.0;       // evaluation pass before any update
  double final_loss = 0.0;         // evaluation pass after training
};

/// Mean objective over one deterministic pass of the dataset, no updates.
double evaluation_loss(const EncoderStack& encoder, const SslDataset& dataset, const PairManifest* manifest,
                       const TrainConfig& config);

/// Plain SGD with a fixed step. Throws DivergenceDetected on a non-finite loss
/// and ConfigError when polygon positives are requested without a manifest.
TrainResult train(const SslDataset& dataset, const PairManifest* manifest, const TrainConfig& config);

}  // namespace pmatch
