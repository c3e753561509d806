#include "pmatch/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "pmatch/error.hpp"

namespace pmatch {

void DatasetConfig::validate() const {
  sim.validate();
  features.validate();
  if (scenes < 1) throw Error(ErrorCode::ConfigError, "need at least one scene");
  if (test_scenes < 0 || test_scenes >= scenes)
    throw Error(ErrorCode::ConfigError, "test_scenes must leave at least one training scene");
}

Dataset simulate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset out;
  for (int i = 0; i < config.scenes; ++i) {
    const SceneSpec spec = random_scene_spec(config.sim, config.seed, i);
    SceneOutput scene;
    try {
      scene = generate_scene(spec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyScene) throw;
      continue;
    }
    if (i >= config.scenes - config.test_scenes) out.test_episodes.insert(spec.episode_id);
    out.truth.merge(scene.truth);
    out.observations.insert(out.observations.end(), scene.observations.begin(), scene.observations.end());
  }
  if (out.observations.empty()) throw Error(ErrorCode::EmptyScene, "no scene produced detections");
  out.features = synth_views(config.features, out.truth, out.observations, mix_seed(config.seed, 0xfea7ULL));
  return out;
}

PairManifest build_manifest(std::span<const Observation> observations, const MinerConfig& config,
                            FootprintSet* footprints) {
  FootprintSet set = build_footprints(observations, config);
  PairManifest manifest = mine_pairs(set.footprints, config);
  for (const auto& r : set.rejections) manifest.add_query(r.key);
  if (footprints) *footprints = std::move(set);
  return manifest;
}

SplitFeatures split_features(const Dataset& dataset) {
  std::vector<ObservationKey> train_keys, test_keys;
  std::vector<int> train_labels, test_labels;
  for (const auto& obs : dataset.observations) {
    const int label = dataset.truth.labels.at(obs.key()).class_id;
    if (dataset.is_test(obs)) {
      test_keys.push_back(obs.key());
      test_labels.push_back(label);
    } else {
      train_keys.push_back(obs.key());
      train_labels.push_back(label);
    }
  }
  auto gather = [&](const std::vector<ObservationKey>& keys) {
    const Eigen::Index dim = dataset.features.empty() ? 0 : dataset.features.begin()->second.size();
    Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto it = dataset.features.find(keys[i]);
      if (it == dataset.features.end())
        throw Error(ErrorCode::UnknownQuery, "no features for " + keys[i].image_id + "/" + keys[i].box_id);
      m.col(static_cast<Eigen::Index>(i)) = it->second;
    }
    return m;
  };
  SplitFeatures out;
  out.train = SslDataset(train_keys, gather(train_keys));
  out.test = SslDataset(test_keys, gather(test_keys));
  out.train_labels = std::move(train_labels);
  out.test_labels = std::move(test_labels);
  return out;
}

EvalReport run_eval_grid(const Dataset& dataset, const PairManifest* manifest, const GridSpec& spec,
                         std::vector<TrainedRun>* runs) {
  spec.probe.validate();
  const SplitFeatures split = split_features(dataset);
  if (split.train.size() < 2 || split.test.size() < 1)
    throw Error(ErrorCode::EmptyClass, "evaluation needs train and test observations");

  struct Job {
    Method method;
    PositiveRegime regime;
    std::uint64_t seed;
    TrainResult result;
    std::vector<Metrics> metrics;  // one per fraction
  };
  std::vector<Job> jobs;
  for (Method m : spec.methods)
    for (PositiveRegime r : spec.regimes)
      for (std::uint64_t s : spec.seeds) jobs.push_back({m, r, s, {}, {}});

  auto run_job = [&](Job& job) {
    TrainConfig cfg = spec.train;
    cfg.method = job.method;
    cfg.positives = job.regime;
    cfg.seed = job.seed;
    job.result = train(split.train, manifest, cfg);
    const Eigen::MatrixXd train_feats = job.result.encoder.features(split.train.features());
    const Eigen::MatrixXd test_feats = job.result.encoder.features(split.test.features());
    for (double fraction : spec.probe.fractions) {
      const auto subset = stratified_subset(split.train_labels, fraction, mix_seed(job.seed, 0x5b5e7ULL));
      Eigen::MatrixXd x(train_feats.rows(), static_cast<Eigen::Index>(subset.size()));
      std::vector<int> y;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = train_feats.col(static_cast<Eigen::Index>(subset[i]));
        y.push_back(split.train_labels[subset[i]]);
      }
      ProbeConfig probe = spec.probe;
      probe.seed = job.seed;
      const LinearClassifier clf = train_probe(x, y, kNumClasses, probe);
      job.metrics.push_back(compute_metrics(clf.predict(test_feats), split.test_labels, kNumClasses));
    }
  };

  const int threads = std::max(1, std::min<int>(spec.threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    for (auto& job : jobs) run_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(jobs[i]);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  for (Method m : spec.methods) {
    for (PositiveRegime r : spec.regimes) {
      for (std::size_t f = 0; f < spec.probe.fractions.size(); ++f) {
        EvalCell cell;
        cell.method = std::string(to_string(m));
        cell.regime = std::string(to_string(r));
        cell.fraction = spec.probe.fractions[f];
        for (const auto& job : jobs) {
          if (job.method != m || job.regime != r) continue;
          cell.seeds.push_back(job.seed);
          cell.per_seed.push_back(job.metrics[f]);
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  if (runs) {
    for (auto& job : jobs) runs->push_back({job.method, job.regime, job.seed, std::move(job.result)});
  }
  return report;
}

std::vector<double> parse_depth_range(const std::string& text) {
  double start = 0.0, stop = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
    throw Error(ErrorCode::ConfigError, "depth range must look like start:stop:step");
  if (!(start > 0.0) || !(stop >= start) || !(step > 0.0))
    throw Error(ErrorCode::ConfigError, "depth range needs 0 < start <= stop and step > 0");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (n > 10000) throw Error(ErrorCode::ConfigError, "depth range has too many values");
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

std::vector<SweepRow> sweep_depth(std::span<const Observation> observations, const GroundTruth& truth,
                                  std::span<const double> depths, const MinerConfig& base) {
  // Same-instance pairs within each agent + episode group, before any depth gate.
  std::map<std::pair<std::string, std::string>, std::map<int, std::size_t>> group_counts;
  for (const auto& obs : observations) {
    const auto it = truth.labels.find(obs.key());
    if (it != truth.labels.end()) ++group_counts[{obs.agent_id, obs.episode_id}][it->second.instance_id];
  }
  std::size_t all_pairs = 0;
  for (const auto& [group, counts] : group_counts)
    for (const auto& [instance, n] : counts) all_pairs += n * (n - 1) / 2;

  std::vector<SweepRow> rows;
  for (double depth : depths) {
    MinerConfig cfg = base;
    cfg.max_depth = depth;
    FootprintSet set;
    const PairManifest manifest = build_manifest(observations, cfg, &set);
    const ManifestScore score = score_manifest(manifest, truth, set.footprints);
    SweepRow row;
    row.depth = depth;
    row.accepted = set.footprints.size();
    row.rejected = set.rejections.size();
    row.pairs = score.mined_pairs;
    row.precision = score.precision;
    row.recall = score.recall;
    row.coverage = all_pairs ? static_cast<double>(score.true_pairs) / static_cast<double>(all_pairs) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  const bool with_probe = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.top1.has_value(); });
  std::ostringstream os;
  os << "depth,accepted,rejected,pairs,precision,recall,coverage";
  if (with_probe) os << ",top1,balanced_top1";
  os << "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f,%zu,%zu,%zu,%.6f,%.6f,%.6f", r.depth, r.accepted, r.rejected,
                  r.pairs, r.precision, r.recall, r.coverage);
    os << buf;
    if (with_probe) {
      std::snprintf(buf, sizeof(buf), ",%.4f,%.4f", r.top1.value_or(NAN), r.balanced_top1.value_or(NAN));
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pmatch
