#include "tsf/config.hpp"

#include <fstream>

using nlohmann::json;

namespace tsf {

Config Config::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  return from_json(std::move(j));
}

namespace {

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

void flatten(const json& j, const std::string& prefix, std::set<std::string>& out) {
  if (!j.is_object()) {
    out.insert(prefix);
    return;
  }
  for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
}

}  // namespace

const json* Config::find(const std::string& dotted) const {
  const json* cur = &root_;
  for (const auto& part : split_path(dotted)) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &cur->at(part);
  }
  return cur;
}

bool Config::has(const std::string& dotted) const { return find(dotted) != nullptr; }

void Config::set_dotted(const std::string& key, const std::string& value) {
  json* cur = &root_;
  const auto parts = split_path(key);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cur->contains(parts[i]) || !(*cur)[parts[i]].is_object()) (*cur)[parts[i]] = json::object();
    cur = &(*cur)[parts[i]];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string
  }
  (*cur)[parts.back()] = parsed;
}

void Config::check_known(const std::set<std::string>& allowed) const {
  std::set<std::string> present;
  flatten(root_, "", present);
  for (const auto& k : present)
    if (!allowed.count(k)) throw UsageError("unknown config key: " + k);
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "model.variant",
      "model.stage_channels",
      "model.stem_channels",
      "model.fused_channels",
      "model.template_spatial",
      "model.seed",
      "track.window_influence",
      "track.penalty_k",
      "track.size_lr",
      "track.template_size",
      "track.instance_size",
      "track.update_templates",
      "track.confidence_gate",
      "track.confidence_gate_threshold",
      "train.stage1.epochs",
      "train.stage1.batch_size",
      "train.stage1.warmup_epochs",
      "train.stage1.warmup_lr_start",
      "train.stage1.warmup_lr_end",
      "train.stage1.decay_lr_start",
      "train.stage1.decay_lr_end",
      "train.stage1.lambda_reg",
      "train.stage1.momentum",
      "train.stage1.pairs",
      "train.stage1.max_frame_gap",
      "train.stage1.max_center_jitter",
      "train.stage1.scale_jitter",
      "train.stage2.epochs",
      "train.stage2.batch_size",
      "train.stage2.decay_lr_start",
      "train.stage2.decay_lr_end",
      "train.stage2.momentum",
      "seed",
  };
  return keys;
}

BackboneConfig backbone_config_from(const Config& c) {
  const std::string variant = c.get<std::string>("model.variant", "tiny");
  BackboneConfig cfg = variant == "full" ? BackboneConfig::full() : BackboneConfig::tiny();
  if (c.has("model.stage_channels")) {
    auto sc = c.get<std::vector<int>>("model.stage_channels", {});
    if (sc.size() != 4) throw UsageError("model.stage_channels must list 4 values");
    std::copy(sc.begin(), sc.end(), cfg.stage_channels.begin());
  }
  cfg.stem_channels = c.get<int>("model.stem_channels", cfg.stem_channels);
  cfg.fused_channels = c.get<int>("model.fused_channels", cfg.fused_channels);
  cfg.template_spatial = c.get<int>("model.template_spatial", cfg.template_spatial);
  cfg.validate();
  return cfg;
}

TrackConfig track_config_from(const Config& c) {
  TrackConfig t;
  const std::string variant = c.get<std::string>("model.variant", "tiny");
  if (variant != "full") {
    t.template_size = 47;
    t.instance_size = 95;
  }
  t.window_influence = c.get<double>("track.window_influence", t.window_influence);
  t.penalty_k = c.get<double>("track.penalty_k", t.penalty_k);
  t.size_lr = c.get<double>("track.size_lr", t.size_lr);
  t.template_size = c.get<int>("track.template_size", t.template_size);
  t.instance_size = c.get<int>("track.instance_size", t.instance_size);
  t.update_templates = c.get<bool>("track.update_templates", t.update_templates);
  t.confidence_gate = c.get<bool>("track.confidence_gate", t.confidence_gate);
  t.confidence_gate_threshold =
      c.get<double>("track.confidence_gate_threshold", t.confidence_gate_threshold);
  t.validate();
  return t;
}

TrainConfig train_config_from(const Config& c, int stage) {
  TrainConfig t;
  t.stage = stage;
  t.seed = c.get<unsigned long long>("seed", 1);
  const std::string p = stage == 1 ? "train.stage1." : "train.stage2.";
  if (stage == 2) {
    t.epochs = 20;
    t.batch_size = 16;
    t.warmup_epochs = 0;
    t.decay_lr_start = 1e-2;
    t.decay_lr_end = 1e-3;
  }
  t.epochs = c.get<int>(p + "epochs", t.epochs);
  t.batch_size = c.get<int>(p + "batch_size", t.batch_size);
  t.warmup_epochs = c.get<int>(p + "warmup_epochs", t.warmup_epochs);
  t.warmup_lr_start = c.get<double>(p + "warmup_lr_start", t.warmup_lr_start);
  t.warmup_lr_end = c.get<double>(p + "warmup_lr_end", t.warmup_lr_end);
  t.decay_lr_start = c.get<double>(p + "decay_lr_start", t.decay_lr_start);
  t.decay_lr_end = c.get<double>(p + "decay_lr_end", t.decay_lr_end);
  t.lambda_reg = c.get<double>(p + "lambda_reg", t.lambda_reg);
  t.momentum = c.get<double>(p + "momentum", t.momentum);
  t.validate();
  return t;
}

PairSamplerConfig pair_sampler_config_from(const Config& c) {
  PairSamplerConfig p;
  TrackConfig t = track_config_from(c);
  p.template_size = t.template_size;
  p.instance_size = t.instance_size;
  p.max_frame_gap = c.get<int>("train.stage1.max_frame_gap", p.max_frame_gap);
  p.max_center_jitter = c.get<double>("train.stage1.max_center_jitter", p.max_center_jitter);
  p.scale_jitter = c.get<double>("train.stage1.scale_jitter", p.scale_jitter);
  return p;
}

}  // namespace tsf
