#include "pmatch/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "pmatch/config.hpp"
#include "pmatch/error.hpp"
#include "pmatch/io.hpp"
#include "pmatch/pipeline.hpp"
#include "pmatch/viz.hpp"

namespace pmatch {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  int threads = 1;

  // simulate
  std::optional<std::uint64_t> seed;
  std::optional<int> scenes;
  std::optional<int> test_scenes;
  std::string out;

  // match / sweep / viz
  std::string obs;
  std::string gt;
  std::string features;
  std::string manifest;
  std::string rejections;
  std::optional<double> max_depth;
  std::optional<double> min_overlap;
  std::optional<double> min_iou;
  std::optional<double> grid_cell;
  std::string depths = "0.5:1.0:0.1";
  bool with_training = false;

  // train / eval
  std::string data;
  std::vector<std::string> methods;
  std::vector<std::string> positives;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  std::optional<int> epochs;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + dir.string());
}

std::string join(const fs::path& dir, const char* name) { return (dir / name).string(); }

PipelineConfig load_base_config(const Options& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
  }
  PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
  if (o.max_depth) cfg.miner.max_depth = *o.max_depth;
  if (o.min_overlap) cfg.miner.min_overlap_area = *o.min_overlap;
  if (o.min_iou) cfg.miner.min_iou = *o.min_iou;
  if (o.grid_cell) cfg.miner.grid_cell = *o.grid_cell;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (!o.fractions.empty()) cfg.probe.fractions = o.fractions;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  cfg.validate();
  return cfg;
}

// observations.jsonl + groundtruth.jsonl + features.bin as written by `simulate`.
Dataset load_dataset(const std::string& obs_path, const std::string& gt_path, const std::string& features_path) {
  Dataset d;
  d.observations = read_observations(obs_path);
  const LabelFile labels = read_ground_truth(gt_path);
  d.truth = labels.truth;
  for (const auto& obs : d.observations) {
    const auto it = labels.split.find(obs.key());
    if (it == labels.split.end())
      throw Error(ErrorCode::ParseError, "no label for " + obs.image_id + "/" + obs.box_id);
    if (it->second == "test") d.test_episodes.insert(obs.episode_id);
  }
  if (!features_path.empty()) d.features = read_features(features_path);
  return d;
}

std::string data_file(const Options& o, const std::string& explicit_path, const char* name) {
  if (!explicit_path.empty()) return explicit_path;
  if (o.data.empty()) throw Error(ErrorCode::ConfigError, std::string("need --data or an explicit path for ") + name);
  return join(o.data, name);
}

std::vector<Method> methods_of(const Options& o, const PipelineConfig& cfg) {
  std::vector<Method> out;
  for (const auto& m : o.methods) out.push_back(parse_method(m));
  if (out.empty()) out.push_back(cfg.train.method);
  return out;
}

std::vector<PositiveRegime> regimes_of(const Options& o, const PipelineConfig& cfg) {
  std::vector<PositiveRegime> out;
  for (const auto& r : o.positives) out.push_back(parse_regime(r));
  if (out.empty()) out.push_back(cfg.train.positives);
  return out;
}

std::optional<PairManifest> manifest_for(const Options& o, const std::vector<PositiveRegime>& regimes) {
  const bool needs = std::find(regimes.begin(), regimes.end(), PositiveRegime::Polygon) != regimes.end();
  if (!o.manifest.empty()) return read_manifest(o.manifest);
  if (needs) throw Error(ErrorCode::ConfigError, "--positives polygon requires --manifest");
  return std::nullopt;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  PipelineConfig cfg = load_base_config(o);
  if (o.seed) cfg.data.seed = *o.seed;
  if (o.scenes) cfg.data.scenes = *o.scenes;
  if (o.test_scenes) cfg.data.test_scenes = *o.test_scenes;
  if (cfg.data.scenes < 1) throw Error(ErrorCode::ConfigError, "--scenes must be at least 1");
  if (cfg.data.test_scenes >= cfg.data.scenes) cfg.data.test_scenes = cfg.data.scenes - 1;
  const Dataset d = simulate_dataset(cfg.data);

  const fs::path dir = o.out.empty() ? fs::path("sim") : fs::path(o.out);
  ensure_dir(dir);
  std::ostringstream obs_text, gt_text, feat_bytes;
  write_observations(obs_text, d.observations);
  write_ground_truth(gt_text, d.observations, d.truth, d.test_episodes);
  std::vector<ObservationKey> order;
  for (const auto& obs : d.observations) order.push_back(obs.key());
  write_features(feat_bytes, d.features, order);
  write_text(dir / "observations.jsonl", obs_text.str());
  write_text(dir / "groundtruth.jsonl", gt_text.str());
  write_text(dir / "features.bin", feat_bytes.str());

  std::vector<std::size_t> counts(kNumClasses, 0);
  for (const auto& [key, label] : d.truth.labels) ++counts[static_cast<std::size_t>(label.class_id)];
  out << "observations " << d.observations.size() << "\n";
  for (int c = 0; c < kNumClasses; ++c) out << "class " << c << " " << counts[static_cast<std::size_t>(c)] << "\n";
  return 0;
}

int cmd_match(const Options& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_base_config(o);
  const auto observations = read_observations(o.obs);
  FootprintSet set;
  const PairManifest manifest = build_manifest(observations, cfg.miner, &set);

  const fs::path out_path = o.out.empty() ? fs::path("manifest.jsonl") : fs::path(o.out);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  std::ostringstream m, r;
  write_manifest(m, manifest);
  write_rejections(r, set.rejections);
  write_text(out_path, m.str());
  const fs::path rej_path =
      o.rejections.empty() ? fs::path(out_path).replace_extension(".rejections.jsonl") : fs::path(o.rejections);
  write_text(rej_path, r.str());

  const std::size_t pairs = manifest.pair_count();
  out << "accepted " << set.footprints.size() << " rejected " << set.rejections.size() << " pairs " << pairs << "\n";
  if (pairs == 0) err << "warning: no overlapping footprints were found\n";
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_base_config(o);
  const std::vector<double> depths = parse_depth_range(o.depths);
  const std::string obs_path = data_file(o, o.obs, "observations.jsonl");
  const std::string gt_path = data_file(o, o.gt, "groundtruth.jsonl");
  std::string feat_path;
  if (o.with_training) feat_path = data_file(o, o.features, "features.bin");
  const Dataset d = load_dataset(obs_path, gt_path, feat_path);

  std::vector<SweepRow> rows = sweep_depth(d.observations, d.truth, depths, cfg.miner);
  if (o.with_training) {
    GridSpec spec;
    spec.methods = methods_of(o, cfg);
    spec.regimes = {PositiveRegime::Polygon};
    spec.seeds = cfg.seeds;
    spec.train = cfg.train;
    spec.probe = cfg.probe;
    spec.threads = o.threads;
    const double fraction = cfg.probe.fractions.front();
    spec.probe.fractions = {fraction};
    for (auto& row : rows) {
      MinerConfig mc = cfg.miner;
      mc.max_depth = row.depth;
      const PairManifest manifest = build_manifest(d.observations, mc);
      const EvalReport report = run_eval_grid(d, &manifest, spec);
      double top1 = 0.0, balanced = 0.0;
      for (const auto& cell : report.cells) {
        top1 += cell.mean_top1();
        balanced += cell.mean_balanced_top1();
      }
      row.top1 = top1 / static_cast<double>(report.cells.size());
      row.balanced_top1 = balanced / static_cast<double>(report.cells.size());
      err << "depth " << row.depth << " probed\n";
    }
  }
  const std::string csv = sweep_to_csv(rows);
  if (o.out.empty()) {
    out << csv;
  } else {
    write_text(o.out, csv);
  }
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const PipelineConfig cfg = load_base_config(o);
  const auto methods = methods_of(o, cfg);
  const auto regimes = regimes_of(o, cfg);
  const auto manifest = manifest_for(o, regimes);
  const Dataset d = load_dataset(data_file(o, o.obs, "observations.jsonl"), data_file(o, o.gt, "groundtruth.jsonl"),
                                 data_file(o, o.features, "features.bin"));
  const SplitFeatures split = split_features(d);
  const fs::path dir = o.out.empty() ? fs::path("checkpoints") : fs::path(o.out);
  ensure_dir(dir);
  for (Method m : methods) {
    for (PositiveRegime r : regimes) {
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.method = m;
        tc.positives = r;
        tc.seed = seed;
        const TrainResult res = train(split.train, manifest ? &*manifest : nullptr, tc);
        const std::string stem =
            std::string(to_string(m)) + "_" + std::string(to_string(r)) + "_s" + std::to_string(seed);
        write_text(dir / (stem + ".json"), checkpoint_to_json(res.encoder, tc, res.loss_curve));
        std::ostringstream curve;
        write_loss_curve(curve, res.loss_curve);
        write_text(dir / (stem + "_loss.csv"), curve.str());
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s initial_loss %.6f final_loss %.6f\n", stem.c_str(), res.initial_loss,
                      res.final_loss);
        out << buf;
      }
    }
  }
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const PipelineConfig cfg = load_base_config(o);
  GridSpec spec;
  if (!o.methods.empty()) spec.methods = methods_of(o, cfg);
  if (!o.positives.empty()) spec.regimes = regimes_of(o, cfg);
  spec.seeds = cfg.seeds;
  spec.train = cfg.train;
  spec.probe = cfg.probe;
  spec.threads = o.threads;
  const auto manifest = manifest_for(o, spec.regimes);
  const Dataset d = load_dataset(data_file(o, o.obs, "observations.jsonl"), data_file(o, o.gt, "groundtruth.jsonl"),
                                 data_file(o, o.features, "features.bin"));
  const EvalReport report = run_eval_grid(d, manifest ? &*manifest : nullptr, spec);
  const std::string table = report.format_table();
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "report.json", report.to_json());
    write_text(fs::path(o.out) / "table.txt", table);
  }
  out << table;
  return 0;
}

int cmd_viz(const Options& o, std::ostream& out) {
  const PipelineConfig cfg = load_base_config(o);
  const auto observations = read_observations(o.obs);
  const FootprintSet set = build_footprints(observations, cfg.miner);
  std::optional<PairManifest> manifest;
  if (!o.manifest.empty()) manifest = read_manifest(o.manifest);
  std::optional<GroundTruth> truth;
  if (!o.gt.empty()) truth = read_ground_truth(o.gt).truth;
  const std::string svg =
      render_svg(observations, set.footprints, manifest ? &*manifest : nullptr, truth ? &*truth : nullptr);
  write_text(o.out.empty() ? fs::path("map.svg") : fs::path(o.out), svg);
  out << "footprints " << set.footprints.size() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Floor-polygon positive mining and self-supervised evaluation", "pmatch"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "JSON config file (default: $PMATCH_CONFIG)");
  app.add_option("--threads", o.threads, "Worker threads for training grids")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "Generate synthetic observations, labels and features");
  sim->add_option("--seed", o.seed);
  sim->add_option("--scenes", o.scenes);
  sim->add_option("--test-scenes", o.test_scenes);
  sim->add_option("--out", o.out, "Output directory");

  auto* match = app.add_subcommand("match", "Mine footprint-overlap positives");
  match->add_option("obs,--obs", o.obs, "Observations JSONL")->required();
  match->add_option("--max-depth", o.max_depth);
  match->add_option("--min-overlap", o.min_overlap);
  match->add_option("--min-iou", o.min_iou);
  match->add_option("--grid-cell", o.grid_cell);
  match->add_option("--out", o.out, "Manifest JSONL");
  match->add_option("--rejections", o.rejections, "Rejection log JSONL");

  auto* sweep = app.add_subcommand("sweep-depth", "Mining statistics over a range of depth cutoffs");
  sweep->add_option("--data", o.data, "Directory written by simulate");
  sweep->add_option("--obs", o.obs);
  sweep->add_option("--gt", o.gt);
  sweep->add_option("--features", o.features);
  sweep->add_option("--depths", o.depths, "start:stop:step");
  sweep->add_option("--min-overlap", o.min_overlap);
  sweep->add_option("--min-iou", o.min_iou);
  sweep->add_flag("--train", o.with_training, "Also train and probe at each depth");
  sweep->add_option("--method", o.methods)->delimiter(',');
  sweep->add_option("--fractions", o.fractions)->delimiter(',');
  sweep->add_option("--seeds", o.seeds)->delimiter(',');
  sweep->add_option("--epochs", o.epochs);
  sweep->add_option("--out", o.out, "CSV path (default: stdout)");

  auto* trn = app.add_subcommand("train", "Train encoders and write checkpoints");
  trn->add_option("--data", o.data, "Directory written by simulate");
  trn->add_option("--obs", o.obs);
  trn->add_option("--gt", o.gt);
  trn->add_option("--features", o.features);
  trn->add_option("--manifest", o.manifest);
  trn->add_option("--method", o.methods)->delimiter(',');
  trn->add_option("--positives", o.positives)->delimiter(',');
  trn->add_option("--seeds", o.seeds)->delimiter(',');
  trn->add_option("--epochs", o.epochs);
  trn->add_option("--out", o.out, "Checkpoint directory");

  auto* ev = app.add_subcommand("eval", "Train the method x positives grid and probe frozen features");
  ev->add_option("--data", o.data, "Directory written by simulate");
  ev->add_option("--obs", o.obs);
  ev->add_option("--gt", o.gt);
  ev->add_option("--features", o.features);
  ev->add_option("--manifest", o.manifest);
  ev->add_option("--methods", o.methods)->delimiter(',');
  ev->add_option("--positives", o.positives)->delimiter(',');
  ev->add_option("--fractions", o.fractions)->delimiter(',');
  ev->add_option("--seeds", o.seeds)->delimiter(',');
  ev->add_option("--epochs", o.epochs);
  ev->add_option("--out", o.out, "Report directory");

  auto* viz = app.add_subcommand("viz", "Bird's-eye SVG map of trajectories, footprints and matches");
  viz->add_option("obs,--obs", o.obs, "Observations JSONL")->required();
  viz->add_option("--manifest", o.manifest);
  viz->add_option("--gt", o.gt);
  viz->add_option("--max-depth", o.max_depth);
  viz->add_option("--out", o.out, "SVG path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(o, out);
    if (*match) return cmd_match(o, out, err);
    if (*sweep) return cmd_sweep(o, out, err);
    if (*trn) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*viz) return cmd_viz(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::ParseError) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pmatch
