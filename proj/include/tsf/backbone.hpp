#pragma once

#include <array>
#include <string>

#include "tsf/geometry.hpp"
#include "tsf/nn.hpp"

namespace tsf {

enum class Branch { kTemplate, kInstance };

struct BackboneConfig {
  std::string variant = "full";              // "full" or "tiny"
  std::array<int, 4> stage_channels{256, 512, 1024, 2048};
  int stem_channels = 64;
  int fused_channels = 256;
  int template_spatial = 7;

  static BackboneConfig full() { return BackboneConfig{}; }
  static BackboneConfig tiny() {
    BackboneConfig c;
    c.variant = "tiny";
    c.stage_channels = {16, 32, 64, 128};
    c.stem_channels = 4;
    c.fused_channels = 16;
    c.template_spatial = 5;
    return c;
  }

  void validate() const {
    for (int i = 1; i < 4; ++i)
      if (stage_channels[static_cast<size_t>(i)] <= stage_channels[static_cast<size_t>(i - 1)])
        throw std::invalid_argument("BackboneConfig: stage_channels must be strictly increasing");
    if (fused_channels <= 0 || fused_channels % 8 != 0)
      throw std::invalid_argument("BackboneConfig: fused_channels must be a positive multiple of 8");
    if (template_spatial <= 0) throw std::invalid_argument("BackboneConfig: template_spatial");
  }

  // Spatial sizes along the stride plan (stem 4, stage2 x2, stages 3-4 dilated).
  static int stem_spatial(int input) {
    const int after_conv = (input - 7) / 2 + 1;
    return (after_conv + 2 - 3) / 2 + 1;
  }
  static int stage2_spatial(int input) { return (stem_spatial(input) - 3) / 2 + 1; }
};

struct StageFeatures {
  nn::Var f1, f2, f3, f4;
};

// Paired shallow/deep fused maps; identical spatial extent and channels.
struct TwofoldFeatures {
  nn::Var shallow, deep;

  int spatial() const { return shallow->value.dim(2); }
  int channels() const { return shallow->value.dim(1); }
};

class TwofoldBackbone {
 public:
  TwofoldBackbone(nn::ParamStore& store, const std::string& prefix, const BackboneConfig& cfg,
                  nn::InitRng& rng);

  StageFeatures extract_stages(const nn::Var& img_patch, bool training) const;
  TwofoldFeatures fuse_twofold(const StageFeatures& stages, Branch branch, bool training) const;
  TwofoldFeatures forward(const nn::Var& img_patch, Branch branch, bool training) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  nn::Conv2d stem_conv_;
  nn::BatchNorm2d stem_bn_;
  std::vector<nn::Bottleneck> layer1_, layer2_, layer3_, layer4_;
  // Eq-3 style fusion: per-stage 1x1 reductions plus one merge conv per depth.
  nn::Conv2d ds1_, ds2_, ds3_, ds4_, ds_shallow_, ds_deep_;
  nn::BatchNorm2d ds1_bn_, ds2_bn_, ds3_bn_, ds4_bn_, ds_shallow_bn_, ds_deep_bn_;
};

// Turns an Image into a (1,3,H,W) network input; single-channel frames are
// replicated across the three input planes.
Tensor image_to_input(const Image& img);

}  // namespace tsf
