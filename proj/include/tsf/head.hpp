#pragma once

#include "tsf/backbone.hpp"
#include "tsf/geometry.hpp"

namespace tsf {

// Classification logits (N,2,Hr,Wr) and nonnegative (l,t,r,b) side distances
// (N,4,Hr,Wr) in search-patch pixels.
struct ResponsePair {
  nn::Var cls, reg;

  int rows() const { return cls->value.dim(2); }
  int cols() const { return cls->value.dim(3); }
};

struct FusionWeights {
  nn::Var alpha_s, alpha_d, beta_s, beta_d;
};

// Grid cell -> search-patch anchor mapping shared by decode and encode.
struct ResponseGeometry {
  int rows = 0, cols = 0;
  int stride = 8;
  int patch_size = 0;

  double anchor_x(int j) const { return patch_size / 2.0 + (j - (cols - 1) / 2.0) * stride; }
  double anchor_y(int i) const { return patch_size / 2.0 + (i - (rows - 1) / 2.0) * stride; }
};

// One depth level: per-branch 1x1 adjust convolutions on template and search
// features, depth-wise correlation, then small conv towers for the two maps.
class BranchHead {
 public:
  BranchHead(nn::ParamStore& store, const std::string& prefix, int channels, nn::InitRng& rng);

  ResponsePair forward(const nn::Var& z, const nn::Var& x, bool training) const;

 private:
  nn::Conv2d adj_z_cls_, adj_x_cls_, adj_z_reg_, adj_x_reg_;
  nn::BatchNorm2d adj_z_cls_bn_, adj_x_cls_bn_, adj_z_reg_bn_, adj_x_reg_bn_;
  nn::Conv2d cls_tower1_, cls_tower2_, reg_tower1_, reg_tower2_;
  nn::BatchNorm2d cls_tower_bn_, reg_tower_bn_;
};

class SiamHead {
 public:
  SiamHead(nn::ParamStore& store, const std::string& prefix, int channels, nn::InitRng& rng);

  ResponsePair forward(const TwofoldFeatures& z, const TwofoldFeatures& x, bool training) const;
  ResponsePair forward_shallow(const nn::Var& z, const nn::Var& x, bool training) const {
    return shallow_.forward(z, x, training);
  }
  ResponsePair forward_deep(const nn::Var& z, const nn::Var& x, bool training) const {
    return deep_.forward(z, x, training);
  }
  const FusionWeights& fusion() const { return fusion_; }

 private:
  BranchHead shallow_, deep_;
  FusionWeights fusion_;
};

// P^all = alpha_s P^shallow + alpha_d P^deep (cls), beta likewise (reg).
ResponsePair fuse_responses(const ResponsePair& shallow, const ResponsePair& deep,
                            const FusionWeights& w);

// Regression map -> boxes. Each grid cell's four channels are (left, top,
// right, bottom) distances from its anchor point; boxes come back in frame
// coordinates through the crop's inverse map. Sides clamp to >= 1 px.
std::vector<Box> decode_boxes(const Tensor& reg, const ResponseGeometry& geom,
                              const CropSpec& crop);

Box decode_box_at(const Tensor& reg, int i, int j, const ResponseGeometry& geom,
                  const CropSpec& crop);

}  // namespace tsf
