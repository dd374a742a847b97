#include "tsf/model.hpp"

namespace tsf {

TrackerModel TrackerModel::build(const BackboneConfig& cfg, unsigned long long seed) {
  TrackerModel m;
  m.cfg = cfg;
  nn::InitRng rng(seed);
  m.backbone = std::make_unique<TwofoldBackbone>(m.store, "backbone", cfg, rng);
  m.mu = std::make_unique<MUModule>(m.store, "mu", cfg.fused_channels, rng);
  m.head = std::make_unique<SiamHead>(m.store, "head", cfg.fused_channels, rng);
  return m;
}

namespace {
bool is_mu(const std::string& name) { return name.rfind("mu.", 0) == 0; }
}

void TrackerModel::set_trainable_backbone_head(bool on) {
  for (const auto& [name, v] : store.params())
    if (!is_mu(name)) v->requires_grad = on;
}

void TrackerModel::set_trainable_mu(bool on) {
  for (const auto& [name, v] : store.params())
    if (is_mu(name)) v->requires_grad = on;
}

void TrackerModel::freeze_all() {
  for (const auto& [name, v] : store.params()) v->requires_grad = false;
}

std::vector<nn::Var> TrackerModel::trainable_params() const {
  std::vector<nn::Var> out;
  for (const auto& [name, v] : store.params())
    if (v->requires_grad) out.push_back(v);
  return out;
}

}  // namespace tsf
