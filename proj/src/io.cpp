#include "pmatch/io.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pmatch/error.hpp"

namespace pmatch {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

void expect_exact_keys(const json& obj, std::initializer_list<std::string_view> keys, std::size_t line,
                       std::string_view where) {
  if (!obj.is_object()) fail(line, std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      fail(line, "unknown key '" + it.key() + "' in " + std::string(where));
  }
  for (auto k : keys) {
    if (!obj.contains(std::string(k))) fail(line, "missing key '" + std::string(k) + "' in " + std::string(where));
  }
}

double number(const json& obj, const char* key, std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_number()) fail(line, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::string text(const json& obj, const char* key, std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_string()) fail(line, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& obj, const char* key, std::size_t count, std::size_t line) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != count)
    fail(line, std::string("'") + key + "' must be an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(line, std::string("'") + key + "' must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

json parse_line(const std::string& line, std::size_t line_number) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_number, std::string("malformed JSON: ") + e.what());
  }
}

template <typename Fn>
void for_each_line(std::istream& is, Fn&& fn) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    fn(line, n);
  }
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(path, mode);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return is;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

std::uint64_t get_le(std::istream& is, int bytes) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), bytes)) throw Error(ErrorCode::ParseError, "truncated feature file");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::string get_string(std::istream& is) {
  const auto len = static_cast<std::size_t>(get_le(is, 4));
  if (len > (1u << 20)) throw Error(ErrorCode::ParseError, "implausible id length in feature file");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), static_cast<std::streamsize>(len)))
    throw Error(ErrorCode::ParseError, "truncated feature file");
  return s;
}

json mlp_to_json(const Mlp& mlp) {
  json j;
  j["relu_output"] = mlp.relu_output();
  auto& layers = j["layers"] = json::array();
  for (const auto& layer : mlp.layers()) {
    json l;
    auto& w = l["weight"] = json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      std::vector<double> row(layer.weight.cols());
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row[c] = layer.weight(r, c);
      w.push_back(row);
    }
    l["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(l));
  }
  return j;
}

Mlp mlp_from_json(const json& j) {
  Mlp mlp;
  mlp.set_relu_output(j.at("relu_output").get<bool>());
  for (const auto& l : j.at("layers")) {
    DenseLayer layer;
    const auto& w = l.at("weight");
    const auto rows = static_cast<Eigen::Index>(w.size());
    const auto cols = rows ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(w.at(r).size()) != cols)
        throw Error(ErrorCode::ParseError, "ragged weight matrix in checkpoint");
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = w.at(r).at(c).get<double>();
    }
    const auto b = l.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(b.size()) != rows) throw Error(ErrorCode::ParseError, "bias size mismatch");
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    mlp.layers().push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace

std::string observation_to_jsonl(const Observation& obs) {
  json j;
  j["agent_id"] = obs.agent_id;
  j["episode_id"] = obs.episode_id;
  j["image_id"] = obs.image_id;
  j["box_id"] = obs.box_id;
  j["timestamp_s"] = obs.timestamp;
  j["bbox"] = {obs.bbox.xmin, obs.bbox.ymin, obs.bbox.xmax, obs.bbox.ymax};
  j["pose"] = {{"x_m", obs.pose.x}, {"y_m", obs.pose.y}, {"heading_rad", obs.pose.heading}};
  const auto& k = obs.camera.intrinsics;
  const auto& e = obs.camera.extrinsics;
  json cam;
  cam["fx"] = k.fx;
  cam["fy"] = k.fy;
  cam["cx"] = k.cx;
  cam["cy"] = k.cy;
  cam["skew"] = k.skew;
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) r.push_back(e.rotation(i, c));
  cam["mount_R"] = r;
  cam["mount_t"] = {e.translation.x(), e.translation.y(), e.translation.z()};
  cam["height_m"] = obs.pose.mount_height;
  j["camera"] = std::move(cam);
  return j.dump();
}

Observation observation_from_jsonl(const std::string& line, std::size_t line_number) {
  const json j = parse_line(line, line_number);
  expect_exact_keys(j, {"agent_id", "episode_id", "image_id", "box_id", "timestamp_s", "bbox", "pose", "camera"},
                    line_number, "observation");
  Observation obs;
  obs.agent_id = text(j, "agent_id", line_number);
  obs.episode_id = text(j, "episode_id", line_number);
  obs.image_id = text(j, "image_id", line_number);
  obs.box_id = text(j, "box_id", line_number);
  obs.timestamp = number(j, "timestamp_s", line_number);
  const auto bbox = numbers(j, "bbox", 4, line_number);
  obs.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};

  const json& pose = j.at("pose");
  expect_exact_keys(pose, {"x_m", "y_m", "heading_rad"}, line_number, "pose");
  obs.pose.x = number(pose, "x_m", line_number);
  obs.pose.y = number(pose, "y_m", line_number);
  obs.pose.heading = number(pose, "heading_rad", line_number);

  const json& cam = j.at("camera");
  expect_exact_keys(cam, {"fx", "fy", "cx", "cy", "skew", "mount_R", "mount_t", "height_m"}, line_number, "camera");
  auto& k = obs.camera.intrinsics;
  k.fx = number(cam, "fx", line_number);
  k.fy = number(cam, "fy", line_number);
  k.cx = number(cam, "cx", line_number);
  k.cy = number(cam, "cy", line_number);
  k.skew = number(cam, "skew", line_number);
  const auto r = numbers(cam, "mount_R", 9, line_number);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) obs.camera.extrinsics.rotation(i, c) = r[3 * i + c];
  const auto t = numbers(cam, "mount_t", 3, line_number);
  obs.camera.extrinsics.translation = {t[0], t[1], t[2]};
  obs.pose.mount_height = number(cam, "height_m", line_number);

  try {
    obs.validate();
  } catch (const Error& e) {
    fail(line_number, e.what());
  }
  return obs;
}

void write_observations(std::ostream& os, const std::vector<Observation>& observations) {
  for (const auto& obs : observations) os << observation_to_jsonl(obs) << '\n';
}

std::vector<Observation> read_observations(std::istream& is) {
  std::vector<Observation> out;
  std::set<ObservationKey> seen;
  for_each_line(is, [&](const std::string& line, std::size_t n) {
    out.push_back(observation_from_jsonl(line, n));
    if (!seen.insert(out.back().key()).second) fail(n, "duplicate observation key");
  });
  return out;
}

std::vector<Observation> read_observations(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_observations(is);
}

void write_ground_truth(std::ostream& os, const std::vector<Observation>& observations, const GroundTruth& truth,
                        const std::set<std::string>& test_episodes) {
  for (const auto& obs : observations) {
    const auto it = truth.labels.find(obs.key());
    if (it == truth.labels.end())
      throw Error(ErrorCode::UnknownQuery, "no label for " + obs.image_id + "/" + obs.box_id);
    json j;
    j["agent_id"] = obs.agent_id;
    j["episode_id"] = obs.episode_id;
    j["image_id"] = obs.image_id;
    j["box_id"] = obs.box_id;
    j["instance_id"] = it->second.instance_id;
    j["class_id"] = it->second.class_id;
    j["split"] = test_episodes.count(obs.episode_id) ? "test" : "train";
    os << j.dump() << '\n';
  }
}

LabelFile read_ground_truth(std::istream& is) {
  LabelFile out;
  for_each_line(is, [&](const std::string& line, std::size_t n) {
    const json j = parse_line(line, n);
    expect_exact_keys(j, {"agent_id", "episode_id", "image_id", "box_id", "instance_id", "class_id", "split"}, n,
                      "ground truth");
    const ObservationKey key{text(j, "image_id", n), text(j, "box_id", n)};
    if (!j.at("instance_id").is_number_integer() || !j.at("class_id").is_number_integer())
      fail(n, "instance_id and class_id must be integers");
    const int cls = j.at("class_id").get<int>();
    if (cls < 0 || cls >= kNumClasses) fail(n, "class_id out of range");
    const std::string split = text(j, "split", n);
    if (split != "train" && split != "test") fail(n, "split must be 'train' or 'test'");
    if (!out.truth.labels.emplace(key, GroundTruthLabel{j.at("instance_id").get<int>(), cls}).second)
      fail(n, "duplicate ground-truth key");
    out.split[key] = split;
    out.agent_of[key] = text(j, "agent_id", n);
    out.episode_of[key] = text(j, "episode_id", n);
  });
  return out;
}

LabelFile read_ground_truth(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_ground_truth(is);
}

void write_manifest(std::ostream& os, const PairManifest& manifest) {
  for (const auto& [key, list] : manifest.entries) {
    json j;
    j["image_id"] = key.image_id;
    j["box_id"] = key.box_id;
    auto& cands = j["candidates"] = json::array();
    for (const auto& c : list) {
      cands.push_back(
          {{"image_id", c.key.image_id}, {"box_id", c.key.box_id}, {"overlap_m2", c.overlap_m2}, {"iou", c.iou}});
    }
    os << j.dump() << '\n';
  }
}

PairManifest read_manifest(std::istream& is) {
  PairManifest manifest;
  for_each_line(is, [&](const std::string& line, std::size_t n) {
    const json j = parse_line(line, n);
    expect_exact_keys(j, {"image_id", "box_id", "candidates"}, n, "manifest record");
    const ObservationKey key{text(j, "image_id", n), text(j, "box_id", n)};
    if (manifest.contains(key)) fail(n, "duplicate manifest query");
    auto& list = manifest.entries[key];
    if (!j.at("candidates").is_array()) fail(n, "'candidates' must be an array");
    for (const auto& c : j.at("candidates")) {
      expect_exact_keys(c, {"image_id", "box_id", "overlap_m2", "iou"}, n, "candidate");
      list.push_back({{text(c, "image_id", n), text(c, "box_id", n)}, number(c, "overlap_m2", n), number(c, "iou", n)});
    }
  });
  return manifest;
}

PairManifest read_manifest(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_manifest(is);
}

void write_rejections(std::ostream& os, const std::vector<Rejection>& rejections) {
  for (const auto& r : rejections) {
    json j;
    j["image_id"] = r.key.image_id;
    j["box_id"] = r.key.box_id;
    j["reason"] = to_string(r.reason);
    os << j.dump() << '\n';
  }
}

void write_features(std::ostream& os, const FeatureMap& features, const std::vector<ObservationKey>& order) {
  const std::uint32_t dim = features.empty() ? 0 : static_cast<std::uint32_t>(features.begin()->second.size());
  os.write(kFeatureMagic, sizeof(kFeatureMagic));
  put_u32(os, kFeatureVersion);
  put_u32(os, dim);
  put_u64(os, order.size());
  for (const auto& key : order) {
    const auto it = features.find(key);
    if (it == features.end()) throw Error(ErrorCode::UnknownQuery, "no features for " + key.image_id + "/" + key.box_id);
    if (it->second.size() != dim) throw Error(ErrorCode::DimensionMismatch, "feature dims differ");
    put_u32(os, static_cast<std::uint32_t>(key.image_id.size()));
    os.write(key.image_id.data(), static_cast<std::streamsize>(key.image_id.size()));
    put_u32(os, static_cast<std::uint32_t>(key.box_id.size()));
    os.write(key.box_id.data(), static_cast<std::streamsize>(key.box_id.size()));
    for (Eigen::Index i = 0; i < it->second.size(); ++i) {
      std::uint64_t bits;
      const double v = it->second[i];
      std::memcpy(&bits, &v, sizeof(bits));
      put_u64(os, bits);
    }
  }
}

FeatureMap read_features(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kFeatureMagic, 8) != 0)
    throw Error(ErrorCode::ParseError, "feature file has a bad magic header");
  const auto version = get_le(is, 4);
  if (version != kFeatureVersion) throw Error(ErrorCode::ParseError, "unsupported feature file version");
  const auto dim = static_cast<Eigen::Index>(get_le(is, 4));
  const auto count = get_le(is, 8);
  FeatureMap out;
  for (std::uint64_t r = 0; r < count; ++r) {
    ObservationKey key;
    key.image_id = get_string(is);
    key.box_id = get_string(is);
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const std::uint64_t bits = get_le(is, 8);
      double x;
      std::memcpy(&x, &bits, sizeof(x));
      v[i] = x;
    }
    if (!out.emplace(std::move(key), std::move(v)).second)
      throw Error(ErrorCode::ParseError, "duplicate key in feature file");
  }
  return out;
}

FeatureMap read_features(const std::filesystem::path& path) {
  auto is = open_in(path, std::ios::binary);
  return read_features(is);
}

void write_loss_curve(std::ostream& os, const std::vector<double>& curve) {
  os << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, curve[i]);
    os << buf;
  }
}

std::string checkpoint_to_json(const EncoderStack& encoder, const TrainConfig& config,
                               const std::vector<double>& loss_curve) {
  json j;
  j["format"] = "pmatch-checkpoint";
  j["version"] = 1;
  j["seed"] = config.seed;
  json cfg;
  cfg["method"] = to_string(config.method);
  cfg["positives"] = to_string(config.positives);
  cfg["temperature"] = config.temperature;
  cfg["margin"] = config.margin;
  cfg["batch_size"] = config.batch_size;
  cfg["epochs"] = config.epochs;
  cfg["learning_rate"] = config.learning_rate;
  cfg["eq1_literal"] = config.eq1_literal;
  cfg["augment"] = {{"jitter", config.augment.jitter},
                    {"noise_sigma", config.augment.noise_sigma},
                    {"dropout", config.augment.dropout}};
  const auto& e = config.encoder;
  cfg["encoder"] = {{"input_dim", e.input_dim},         {"hidden_dim", e.hidden_dim},
                    {"feature_dim", e.feature_dim},     {"projector_hidden", e.projector_hidden},
                    {"embedding_dim", e.embedding_dim}, {"predictor_hidden", e.predictor_hidden}};
  j["config"] = std::move(cfg);
  j["encoder"] = {{"f", mlp_to_json(encoder.f)}, {"g", mlp_to_json(encoder.g)}, {"h", mlp_to_json(encoder.h)}};
  j["loss_curve"] = loss_curve;
  return j.dump(1) + "\n";
}

EncoderStack checkpoint_from_json(const std::string& text_in, TrainConfig* config) {
  json j;
  try {
    j = json::parse(text_in);
    if (j.at("format") != "pmatch-checkpoint" || j.at("version") != 1)
      throw Error(ErrorCode::ParseError, "not a version-1 checkpoint");
    EncoderStack enc;
    enc.f = mlp_from_json(j.at("encoder").at("f"));
    enc.g = mlp_from_json(j.at("encoder").at("g"));
    enc.h = mlp_from_json(j.at("encoder").at("h"));
    if (config) {
      const auto& c = j.at("config");
      config->method = parse_method(c.at("method").get<std::string>());
      config->positives = parse_regime(c.at("positives").get<std::string>());
      config->temperature = c.at("temperature").get<double>();
      config->margin = c.at("margin").get<double>();
      config->batch_size = c.at("batch_size").get<int>();
      config->epochs = c.at("epochs").get<int>();
      config->learning_rate = c.at("learning_rate").get<double>();
      config->eq1_literal = c.at("eq1_literal").get<bool>();
      config->seed = j.at("seed").get<std::uint64_t>();
      config->augment.jitter = c.at("augment").at("jitter").get<double>();
      config->augment.noise_sigma = c.at("augment").at("noise_sigma").get<double>();
      config->augment.dropout = c.at("augment").at("dropout").get<double>();
      const auto& e = c.at("encoder");
      config->encoder.input_dim = e.at("input_dim").get<int>();
      config->encoder.hidden_dim = e.at("hidden_dim").get<int>();
      config->encoder.feature_dim = e.at("feature_dim").get<int>();
      config->encoder.projector_hidden = e.at("projector_hidden").get<int>();
      config->encoder.embedding_dim = e.at("embedding_dim").get<int>();
      config->encoder.predictor_hidden = e.at("predictor_hidden").get<int>();
    }
    return enc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed checkpoint: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  auto is = open_in(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << content;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace pmatch
