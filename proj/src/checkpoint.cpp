#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tsf/model.hpp"

// Checkpoint archive: "TSFW0001", a JSON metadata block (variant and channel
// plan), then named tensors. Entry names are module paths plus the parameter
// role, e.g. "backbone.layer2.0.conv2.weight" or "head.fusion.alpha_s".
// Numbers are native little-endian; doubles throughout.

namespace tsf {

namespace {

using nlohmann::json;

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void write_tensor(std::ofstream& f, const std::string& name, uint8_t kind, const Tensor& t) {
  write_u32(f, static_cast<uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  f.write(reinterpret_cast<const char*>(&kind), 1);
  write_u32(f, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) write_u32(f, static_cast<uint32_t>(t.dim(i)));
  f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
}

json meta_of(const TrackerModel& m) {
  return json{{"variant", m.cfg.variant},
              {"stage_channels", m.cfg.stage_channels},
              {"stem_channels", m.cfg.stem_channels},
              {"fused_channels", m.cfg.fused_channels},
              {"template_spatial", m.cfg.template_spatial}};
}

BackboneConfig cfg_of(const json& j) {
  BackboneConfig c;
  c.variant = j.at("variant").get<std::string>();
  auto sc = j.at("stage_channels").get<std::vector<int>>();
  if (sc.size() != 4) throw std::runtime_error("checkpoint: bad stage_channels");
  std::copy(sc.begin(), sc.end(), c.stage_channels.begin());
  c.stem_channels = j.at("stem_channels").get<int>();
  c.fused_channels = j.at("fused_channels").get<int>();
  c.template_spatial = j.at("template_spatial").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const TrackerModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write("TSFW0001", 8);
  const std::string meta = meta_of(model).dump();
  write_u32(f, static_cast<uint32_t>(meta.size()));
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_u32(f, static_cast<uint32_t>(model.store.params().size() + model.store.buffers().size()));
  for (const auto& [name, v] : model.store.params()) write_tensor(f, name, 0, v->value);
  for (const auto& [name, t] : model.store.buffers()) write_tensor(f, name, 1, *t);
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

TrackerModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "TSFW0001", 8) != 0)
    throw std::runtime_error("not a checkpoint archive: " + path);
  const uint32_t meta_len = read_u32(f);
  std::string meta(meta_len, '\0');
  f.read(meta.data(), meta_len);
  TrackerModel model = TrackerModel::build(cfg_of(json::parse(meta)), 0);
  const uint32_t count = read_u32(f);
  size_t loaded = 0;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    uint8_t kind = 0;
    f.read(reinterpret_cast<char*>(&kind), 1);
    const uint32_t ndim = read_u32(f);
    std::vector<int> dims(ndim);
    for (uint32_t i = 0; i < ndim; ++i) dims[i] = static_cast<int>(read_u32(f));
    Tensor t(dims);
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    bool found = false;
    if (kind == 0) {
      for (const auto& [n, v] : model.store.params())
        if (n == name) {
          if (v->value.shape() != t.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
          v->value = t;
          found = true;
          break;
        }
    } else {
      for (const auto& [n, b] : model.store.buffers())
        if (n == name) {
          if (b->shape() != t.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
          *b = t;
          found = true;
          break;
        }
    }
    if (!found) throw std::runtime_error("checkpoint has unknown entry: " + name);
    ++loaded;
  }
  if (loaded != model.store.params().size() + model.store.buffers().size())
    throw std::runtime_error("checkpoint is missing entries");
  model.freeze_all();
  return model;
}

unsigned long long file_checksum(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for checksum: " + path);
  unsigned long long h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    const std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace tsf
