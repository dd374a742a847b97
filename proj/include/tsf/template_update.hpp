#pragma once

#include "tsf/backbone.hpp"

namespace tsf {

// The three live templates plus the fused one. z_in never changes after
// init; z_ac carries history; z_cu is re-extracted each frame at the
// previous prediction.
struct TemplateBank {
  TwofoldFeatures z_in, z_ac, z_cu;
  TwofoldFeatures z_final;  // set by fuse_templates; unset until then

  bool has_final() const { return z_final.shallow != nullptr; }
};

// Residual two-conv fusion, one sub-network per depth with its own
// parameters: z_final = conv2(relu(conv1(concat(z_in, z_ac, z_cu)))) + z_in.
class MUModule {
 public:
  MUModule(nn::ParamStore& store, const std::string& prefix, int channels, nn::InitRng& rng);

  TwofoldFeatures fuse_templates(const TemplateBank& bank) const;

  // Zero the fusion branch so z_final == z_in exactly (harvest-time setting).
  void zero_weights();
  int channels() const { return channels_; }

 private:
  nn::Var forward_depth(const nn::Var& z_in, const nn::Var& z_ac, const nn::Var& z_cu,
                        const nn::Conv2d& c1, const nn::Conv2d& c2) const;
  int channels_ = 0;
  nn::Conv2d shallow_conv1_, shallow_conv2_, deep_conv1_, deep_conv2_;
};

// Euclidean distance between predicted and ground-truth templates, the
// shallow and deep contributions added.
autograd::Var mu_loss(const TwofoldFeatures& predicted, const TwofoldFeatures& ground_truth);

// z_ac <- z_final, z_cu <- z_cu_next, z_in untouched.
TemplateBank advance_bank(const TemplateBank& bank, const TwofoldFeatures& z_final,
                          const TwofoldFeatures& z_cu_next);

}  // namespace tsf
