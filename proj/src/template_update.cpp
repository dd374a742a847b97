#include "tsf/template_update.hpp"

namespace tsf {

using autograd::Var;

MUModule::MUModule(nn::ParamStore& store, const std::string& prefix, int channels, nn::InitRng& rng)
    : channels_(channels) {
  const int mid = 3 * channels / 8;
  shallow_conv1_ = nn::Conv2d(store, prefix + ".shallow.conv1", 3 * channels, mid, 1, 1, 0, 1, true, rng);
  shallow_conv2_ = nn::Conv2d(store, prefix + ".shallow.conv2", mid, channels, 1, 1, 0, 1, true, rng);
  deep_conv1_ = nn::Conv2d(store, prefix + ".deep.conv1", 3 * channels, mid, 1, 1, 0, 1, true, rng);
  deep_conv2_ = nn::Conv2d(store, prefix + ".deep.conv2", mid, channels, 1, 1, 0, 1, true, rng);
}

Var MUModule::forward_depth(const Var& z_in, const Var& z_ac, const Var& z_cu,
                            const nn::Conv2d& c1, const nn::Conv2d& c2) const {
  if (!z_in->value.same_shape(z_ac->value) || !z_in->value.same_shape(z_cu->value))
    throw std::invalid_argument("fuse_templates: bank members disagree on shape");
  if (z_in->value.dim(1) != channels_)
    throw std::invalid_argument("fuse_templates: bank channels do not match MU weights");
  Var cat = autograd::concat_channels({z_in, z_ac, z_cu});
  Var h = autograd::relu(c1.forward(cat));
  return autograd::add(c2.forward(h), z_in);
}

TwofoldFeatures MUModule::fuse_templates(const TemplateBank& bank) const {
  TwofoldFeatures out;
  out.shallow = forward_depth(bank.z_in.shallow, bank.z_ac.shallow, bank.z_cu.shallow,
                              shallow_conv1_, shallow_conv2_);
  out.deep = forward_depth(bank.z_in.deep, bank.z_ac.deep, bank.z_cu.deep, deep_conv1_, deep_conv2_);
  return out;
}

void MUModule::zero_weights() {
  for (const auto& c : {&shallow_conv1_, &shallow_conv2_, &deep_conv1_, &deep_conv2_}) {
    c->weight()->value.zero();
    if (c->bias()) c->bias()->value.zero();
  }
}

Var mu_loss(const TwofoldFeatures& predicted, const TwofoldFeatures& ground_truth) {
  Var s = autograd::l2_distance(predicted.shallow, ground_truth.shallow);
  Var d = autograd::l2_distance(predicted.deep, ground_truth.deep);
  return autograd::add(s, d);
}

TemplateBank advance_bank(const TemplateBank& bank, const TwofoldFeatures& z_final,
                          const TwofoldFeatures& z_cu_next) {
  TemplateBank next;
  next.z_in = bank.z_in;
  next.z_ac = z_final;
  next.z_cu = z_cu_next;
  return next;
}

}  // namespace tsf
