#include "pmatch/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmatch/error.hpp"
#include "pmatch/losses.hpp"

namespace pmatch {
namespace {

struct Batch {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
};

Batch assemble(std::span<const Eigen::Index> members, const SslDataset& dataset, const PairManifest* manifest,
               const TrainConfig& config, Rng& rng) {
  Batch b;
  b.first.resize(dataset.dim(), static_cast<Eigen::Index>(members.size()));
  b.second.resize(dataset.dim(), static_cast<Eigen::Index>(members.size()));
  for (std::size_t i = 0; i < members.size(); ++i) {
    const ViewPair pair =
        make_pair(dataset.keys()[members[i]], config.positives, manifest, dataset, config.augment, rng);
    b.first.col(i) = pair.first;
    b.second.col(i) = pair.second;
  }
  return b;
}

// Forward + loss + (optionally) one SGD update. Returns the batch loss.
double run_batch(EncoderStack& enc, const Batch& batch, const TrainConfig& config, Rng& rng, bool update) {
  const Eigen::Index n = batch.first.cols();
  Eigen::MatrixXd input(batch.first.rows(), 2 * n);
  input << batch.first, batch.second;

  Mlp::Cache f_cache, g_cache, h_cache;
  const Eigen::MatrixXd feats = enc.f.forward(input, &f_cache);
  const Eigen::MatrixXd z = enc.g.forward(feats, &g_cache);

  double loss = 0.0;
  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  Mlp::Gradient h_grad = enc.h.zero_gradient();

  switch (config.method) {
    case Method::SimClr: {
      const auto out = nt_xent_loss(z, config.temperature, config.eq1_literal);
      loss = out.value;
      d_z = out.grad;
      break;
    }
    case Method::SimSiam: {
      const Eigen::MatrixXd p = enc.h.forward(z, &h_cache);
      const auto out = simsiam_loss(p.leftCols(n), p.rightCols(n), z.leftCols(n), z.rightCols(n));
      loss = out.value;
      Eigen::MatrixXd d_p(p.rows(), 2 * n);
      d_p << out.grad_p1, out.grad_p2;
      // Detached targets contribute nothing; only the predictor path reaches z.
      d_z = enc.h.backward(h_cache, d_p, h_grad);
      d_z.leftCols(n) += out.grad_z1;
      d_z.rightCols(n) += out.grad_z2;
      break;
    }
    case Method::Triplet: {
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 2);
      std::vector<Eigen::Index> negative_of(n);
      Eigen::MatrixXd negatives(z.rows(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index j = pick(rng);
        if (j >= i) ++j;
        negative_of[i] = j;
        negatives.col(i) = z.col(j);
      }
      const auto out = triplet_loss(z.leftCols(n), z.rightCols(n), negatives, config.margin);
      loss = out.value;
      d_z.leftCols(n) += out.grad_anchor;
      d_z.rightCols(n) += out.grad_positive;
      for (Eigen::Index i = 0; i < n; ++i) d_z.col(negative_of[i]) += out.grad_negative.col(i);
      break;
    }
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::DivergenceDetected, "non-finite training loss");
  if (!update) return loss;

  Mlp::Gradient g_grad = enc.g.zero_gradient();
  Mlp::Gradient f_grad = enc.f.zero_gradient();
  const Eigen::MatrixXd d_feats = enc.g.backward(g_cache, d_z, g_grad);
  enc.f.backward(f_cache, d_feats, f_grad);
  enc.f.apply_gradient(f_grad, config.learning_rate);
  enc.g.apply_gradient(g_grad, config.learning_rate);
  if (config.method == Method::SimSiam) enc.h.apply_gradient(h_grad, config.learning_rate);
  if (!enc.all_finite()) throw Error(ErrorCode::DivergenceDetected, "non-finite parameters after update");
  return loss;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::SimClr: return "simclr";
    case Method::SimSiam: return "simsiam";
    case Method::Triplet: return "triplet";
  }
  return "unknown";
}

std::string_view to_string(PositiveRegime regime) {
  return regime == PositiveRegime::Standard ? "standard" : "polygon";
}

Method parse_method(std::string_view text) {
  if (text == "simclr") return Method::SimClr;
  if (text == "simsiam") return Method::SimSiam;
  if (text == "triplet") return Method::Triplet;
  throw Error(ErrorCode::ConfigError, "unknown method '" + std::string(text) + "'");
}

PositiveRegime parse_regime(std::string_view text) {
  if (text == "standard") return PositiveRegime::Standard;
  if (text == "polygon") return PositiveRegime::Polygon;
  throw Error(ErrorCode::ConfigError, "unknown positives regime '" + std::string(text) + "'");
}

void AugmentationPolicy::validate() const {
  if (!(jitter >= 0.0 && noise_sigma >= 0.0 && dropout >= 0.0 && dropout < 1.0))
    throw Error(ErrorCode::ConfigError, "augmentation parameters out of range");
}

Eigen::VectorXd AugmentationPolicy::apply(const Eigen::VectorXd& x, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double scale = 1.0 + jitter * normal(rng);
    const double noise = noise_sigma * normal(rng);
    const bool drop = unit(rng) < dropout;
    out[i] = drop ? 0.0 : x[i] * scale + noise;
  }
  return out;
}

void EncoderConfig::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || feature_dim <= 0 || projector_hidden <= 0 || embedding_dim <= 0 ||
      predictor_hidden <= 0)
    throw Error(ErrorCode::ConfigError, "encoder dims must be positive");
}

EncoderStack EncoderStack::create(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0xe1c0deULL));
  EncoderStack enc;
  enc.f = Mlp({config.input_dim, config.hidden_dim, config.feature_dim}, false, rng);
  enc.g = Mlp({config.feature_dim, config.projector_hidden, config.embedding_dim}, false, rng);
  enc.h = Mlp({config.embedding_dim, config.predictor_hidden, config.embedding_dim}, false, rng);
  return enc;
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be positive");
  if (!(margin >= 0.0)) throw Error(ErrorCode::ConfigError, "margin must be non-negative");
  if (batch_size < 2) throw Error(ErrorCode::ConfigError, "batch_size must be at least 2");
  if (epochs < 0) throw Error(ErrorCode::ConfigError, "epochs must be non-negative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::ConfigError, "learning_rate must be non-negative");
  augment.validate();
  encoder.validate();
}

SslDataset::SslDataset(std::vector<ObservationKey> keys, Eigen::MatrixXd features)
    : keys_(std::move(keys)), features_(std::move(features)) {
  if (static_cast<Eigen::Index>(keys_.size()) != features_.cols())
    throw Error(ErrorCode::LengthMismatch, "one feature column per key required");
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!index_.emplace(keys_[i], static_cast<Eigen::Index>(i)).second)
      throw Error(ErrorCode::DuplicateKey, "duplicate dataset key " + keys_[i].image_id + "/" + keys_[i].box_id);
  }
}

std::optional<Eigen::Index> SslDataset::find(const ObservationKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::Index SslDataset::index_of(const ObservationKey& key) const {
  const auto idx = find(key);
  if (!idx) throw Error(ErrorCode::UnknownQuery, "no features for " + key.image_id + "/" + key.box_id);
  return *idx;
}

ViewPair make_pair(const ObservationKey& query, PositiveRegime regime, const PairManifest* manifest,
                   const SslDataset& dataset, const AugmentationPolicy& policy, Rng& rng) {
  const Eigen::VectorXd x = dataset.features().col(dataset.index_of(query));
  ViewPair pair;
  pair.first = policy.apply(x, rng);
  if (regime == PositiveRegime::Polygon) {
    if (!manifest) throw Error(ErrorCode::ConfigError, "polygon positives need a manifest");
    if (const auto partner = sample_positive(*manifest, query, rng)) {
      pair.second = policy.apply(dataset.features().col(dataset.index_of(*partner)), rng);
      pair.partner = partner;
      return pair;
    }
  }
  pair.second = policy.apply(x, rng);
  return pair;
}

double evaluation_loss(const EncoderStack& encoder, const SslDataset& dataset, const PairManifest* manifest,
                       const TrainConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0xe7a1ULL));
  EncoderStack copy = encoder;
  std::vector<Eigen::Index> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  int batches = 0;
  for (std::size_t start = 0; start + 1 < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    if (end - start < 2) break;
    const Batch batch = assemble(std::span(order).subspan(start, end - start), dataset, manifest, config, rng);
    total += run_batch(copy, batch, config, rng, false);
    ++batches;
  }
  return batches ? total / batches : 0.0;
}

TrainResult train(const SslDataset& dataset, const PairManifest* manifest, const TrainConfig& config) {
  config.validate();
  if (dataset.size() < 2) throw Error(ErrorCode::BatchTooSmall, "training needs at least two samples");
  if (dataset.dim() != config.encoder.input_dim)
    throw Error(ErrorCode::DimensionMismatch, "dataset feature dim does not match encoder input");
  if (config.positives == PositiveRegime::Polygon && !manifest)
    throw Error(ErrorCode::ConfigError, "polygon positives need a manifest");

  TrainResult result;
  result.encoder = EncoderStack::create(config.encoder, config.seed);
  result.initial_loss = evaluation_loss(result.encoder, dataset, manifest, config);

  Rng rng(mix_seed(config.seed, 0x7a1aULL));
  std::vector<Eigen::Index> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) break;
      const Batch batch = assemble(std::span(order).subspan(start, end - start), dataset, manifest, config, rng);
      total += run_batch(result.encoder, batch, config, rng, true);
      ++batches;
    }
    result.loss_curve.push_back(batches ? total / batches : 0.0);
  }
  result.final_loss = evaluation_loss(result.encoder, dataset, manifest, config);
  return result;
}

}  // namespace pmatch
