#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "tsf/backbone.hpp"
#include "tsf/errors.hpp"
#include "tsf/tracker.hpp"
#include "tsf/training.hpp"

namespace tsf {

// JSON config addressed by dotted paths ("track.window_influence"). Unknown
// keys are rejected up front so typos surface as errors, not silent defaults.
class Config {
 public:
  Config() : root_(nlohmann::json::object()) {}
  static Config load_file(const std::string& path);
  static Config from_json(nlohmann::json j) {
    Config c;
    c.root_ = std::move(j);
    return c;
  }

  void set_dotted(const std::string& key, const std::string& value);
  bool has(const std::string& dotted) const;

  template <typename T>
  T get(const std::string& dotted, T fallback) const {
    const nlohmann::json* j = find(dotted);
    if (!j) return fallback;
    try {
      return j->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config key '" + dotted + "' has the wrong type");
    }
  }

  void check_known(const std::set<std::string>& allowed) const;
  std::string dump() const { return root_.dump(2); }
  const nlohmann::json& raw() const { return root_; }

 private:
  const nlohmann::json* find(const std::string& dotted) const;
  nlohmann::json root_;
};

// The documented key set (also the validation whitelist).
const std::set<std::string>& known_config_keys();

BackboneConfig backbone_config_from(const Config& c);
TrackConfig track_config_from(const Config& c);
TrainConfig train_config_from(const Config& c, int stage);
PairSamplerConfig pair_sampler_config_from(const Config& c);

}  // namespace tsf
