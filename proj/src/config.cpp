#include "pmatch/config.hpp"

#include <set>

#include "json.hpp"
#include "pmatch/error.hpp"
#include "pmatch/io.hpp"

namespace pmatch {
namespace {

using json = nlohmann::ordered_json;

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, "'" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ConfigError, "bad value for '" + name_ + "." + key + "'");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(ErrorCode::ConfigError, "unknown key '" + name_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

void PipelineConfig::validate() const {
  data.validate();
  miner.validate();
  train.validate();
  probe.validate();
  if (seeds.empty()) throw Error(ErrorCode::ConfigError, "need at least one seed");
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  Section top(root, "config");

  if (const json* j = top.child("simulation")) {
    Section s(*j, "simulation");
    auto& sim = cfg.data.sim;
    s.get("room_min", sim.room_min);
    s.get("room_max", sim.room_max);
    s.get("objects_min", sim.objects_min);
    s.get("objects_max", sim.objects_max);
    s.get("radius_min", sim.radius_min);
    s.get("radius_max", sim.radius_max);
    s.get("height_min", sim.height_min);
    s.get("height_max", sim.height_max);
    s.get("min_separation", sim.min_separation);
    s.get("class_decay", sim.class_decay);
    s.get("trajectory_steps", sim.trajectory_steps);
    s.get("speed", sim.speed);
    s.get("turn_rate", sim.turn_rate);
    s.get("near_object_bias", sim.near_object_bias);
    s.get("pose_jitter", sim.pose_jitter);
    s.get("camera_height", sim.camera.mount_height);
    s.get("max_range", sim.camera.max_range);
    s.get("scenes", cfg.data.scenes);
    s.get("test_scenes", cfg.data.test_scenes);
    s.get("seed", cfg.data.seed);
    s.finish();
  }
  if (const json* j = top.child("features")) {
    Section s(*j, "features");
    auto& f = cfg.data.features;
    s.get("dim", f.dim);
    s.get("nuisance_dim", f.nuisance_dim);
    s.get("class_scale", f.class_scale);
    s.get("instance_sigma", f.instance_sigma);
    s.get("nuisance_scale", f.nuisance_scale);
    s.get("noise_sigma", f.noise_sigma);
    s.get("world_seed", f.world_seed);
    s.finish();
    cfg.train.encoder.input_dim = f.dim;
  }
  if (const json* j = top.child("miner")) {
    Section s(*j, "miner");
    s.get("max_depth", cfg.miner.max_depth);
    s.get("min_overlap_area", cfg.miner.min_overlap_area);
    s.get("min_iou", cfg.miner.min_iou);
    s.get("grid_cell", cfg.miner.grid_cell);
    s.finish();
  }
  if (const json* j = top.child("train")) {
    Section s(*j, "train");
    auto& t = cfg.train;
    std::string method(to_string(t.method)), positives(to_string(t.positives));
    s.get("method", method);
    s.get("positives", positives);
    t.method = parse_method(method);
    t.positives = parse_regime(positives);
    s.get("temperature", t.temperature);
    s.get("margin", t.margin);
    s.get("batch_size", t.batch_size);
    s.get("epochs", t.epochs);
    s.get("learning_rate", t.learning_rate);
    s.get("eq1_literal", t.eq1_literal);
    if (const json* a = s.child("augment")) {
      Section as(*a, "train.augment");
      as.get("jitter", t.augment.jitter);
      as.get("noise_sigma", t.augment.noise_sigma);
      as.get("dropout", t.augment.dropout);
      as.finish();
    }
    if (const json* e = s.child("encoder")) {
      Section es(*e, "train.encoder");
      es.get("hidden_dim", t.encoder.hidden_dim);
      es.get("feature_dim", t.encoder.feature_dim);
      es.get("projector_hidden", t.encoder.projector_hidden);
      es.get("embedding_dim", t.encoder.embedding_dim);
      es.get("predictor_hidden", t.encoder.predictor_hidden);
      es.finish();
    }
    s.finish();
  }
  if (const json* j = top.child("probe")) {
    Section s(*j, "probe");
    s.get("fractions", cfg.probe.fractions);
    s.get("epochs", cfg.probe.epochs);
    s.get("learning_rate", cfg.probe.learning_rate);
    s.get("weight_decay", cfg.probe.weight_decay);
    s.finish();
  }
  top.get("seeds", cfg.seeds);
  top.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string default_config_json() {
  const PipelineConfig d;
  const auto& sim = d.data.sim;
  const auto& f = d.data.features;
  const auto& t = d.train;
  json j;
  j["simulation"] = {{"room_min", sim.room_min},
                     {"room_max", sim.room_max},
                     {"objects_min", sim.objects_min},
                     {"objects_max", sim.objects_max},
                     {"radius_min", sim.radius_min},
                     {"radius_max", sim.radius_max},
                     {"height_min", sim.height_min},
                     {"height_max", sim.height_max},
                     {"min_separation", sim.min_separation},
                     {"class_decay", sim.class_decay},
                     {"trajectory_steps", sim.trajectory_steps},
                     {"speed", sim.speed},
                     {"turn_rate", sim.turn_rate},
                     {"near_object_bias", sim.near_object_bias},
                     {"pose_jitter", sim.pose_jitter},
                     {"camera_height", sim.camera.mount_height},
                     {"max_range", sim.camera.max_range},
                     {"scenes", d.data.scenes},
                     {"test_scenes", d.data.test_scenes},
                     {"seed", d.data.seed}};
  j["features"] = {{"dim", f.dim},
                   {"nuisance_dim", f.nuisance_dim},
                   {"class_scale", f.class_scale},
                   {"instance_sigma", f.instance_sigma},
                   {"nuisance_scale", f.nuisance_scale},
                   {"noise_sigma", f.noise_sigma},
                   {"world_seed", f.world_seed}};
  j["miner"] = {{"max_depth", d.miner.max_depth},
                {"min_overlap_area", d.miner.min_overlap_area},
                {"min_iou", d.miner.min_iou},
                {"grid_cell", d.miner.grid_cell}};
  j["train"] = {{"method", to_string(t.method)},
                {"positives", to_string(t.positives)},
                {"temperature", t.temperature},
                {"margin", t.margin},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"learning_rate", t.learning_rate},
                {"eq1_literal", t.eq1_literal},
                {"augment", {{"jitter", t.augment.jitter},
                             {"noise_sigma", t.augment.noise_sigma},
                             {"dropout", t.augment.dropout}}},
                {"encoder", {{"hidden_dim", t.encoder.hidden_dim},
                             {"feature_dim", t.encoder.feature_dim},
                             {"projector_hidden", t.encoder.projector_hidden},
                             {"embedding_dim", t.encoder.embedding_dim},
                             {"predictor_hidden", t.encoder.predictor_hidden}}}};
  j["probe"] = {{"fractions", d.probe.fractions},
                {"epochs", d.probe.epochs},
                {"learning_rate", d.probe.learning_rate},
                {"weight_decay", d.probe.weight_decay}};
  j["seeds"] = d.seeds;
  return j.dump(2) + "\n";
}

}  // namespace pmatch
