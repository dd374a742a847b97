#include "tsf/head.hpp"

#include <algorithm>

namespace tsf {

using autograd::Var;

namespace {
constexpr double kRegClamp = 30.0;  // exp() input cap; sides beyond e^30 px are junk anyway
}

BranchHead::BranchHead(nn::ParamStore& store, const std::string& prefix, int channels,
                       nn::InitRng& rng) {
  auto conv1x1 = [&](const std::string& n, int ci, int co, bool bias) {
    return nn::Conv2d(store, n, ci, co, 1, 1, 0, 1, bias, rng);
  };
  adj_z_cls_ = conv1x1(prefix + ".cls.adjust_z.conv", channels, channels, false);
  adj_z_cls_bn_ = nn::BatchNorm2d(store, prefix + ".cls.adjust_z.bn", channels);
  adj_x_cls_ = conv1x1(prefix + ".cls.adjust_x.conv", channels, channels, false);
  adj_x_cls_bn_ = nn::BatchNorm2d(store, prefix + ".cls.adjust_x.bn", channels);
  adj_z_reg_ = conv1x1(prefix + ".reg.adjust_z.conv", channels, channels, false);
  adj_z_reg_bn_ = nn::BatchNorm2d(store, prefix + ".reg.adjust_z.bn", channels);
  adj_x_reg_ = conv1x1(prefix + ".reg.adjust_x.conv", channels, channels, false);
  adj_x_reg_bn_ = nn::BatchNorm2d(store, prefix + ".reg.adjust_x.bn", channels);

  cls_tower1_ = conv1x1(prefix + ".cls.tower1.conv", channels, channels, false);
  cls_tower_bn_ = nn::BatchNorm2d(store, prefix + ".cls.tower1.bn", channels);
  cls_tower2_ = conv1x1(prefix + ".cls.tower2", channels, 2, true);
  reg_tower1_ = conv1x1(prefix + ".reg.tower1.conv", channels, channels, false);
  reg_tower_bn_ = nn::BatchNorm2d(store, prefix + ".reg.tower1.bn", channels);
  reg_tower2_ = conv1x1(prefix + ".reg.tower2", channels, 4, true);
}

ResponsePair BranchHead::forward(const Var& z, const Var& x, bool training) const {
  if (z->value.dim(1) != x->value.dim(1))
    throw std::invalid_argument("branch_forward: channel mismatch between template and search");
  Var zc = adj_z_cls_bn_.forward(adj_z_cls_.forward(z), training);
  Var xc = adj_x_cls_bn_.forward(adj_x_cls_.forward(x), training);
  Var corr_c = autograd::xcorr_depthwise(zc, xc);
  Var cls = autograd::relu(cls_tower_bn_.forward(cls_tower1_.forward(corr_c), training));
  cls = cls_tower2_.forward(cls);

  Var zr = adj_z_reg_bn_.forward(adj_z_reg_.forward(z), training);
  Var xr = adj_x_reg_bn_.forward(adj_x_reg_.forward(x), training);
  Var corr_r = autograd::xcorr_depthwise(zr, xr);
  Var reg = autograd::relu(reg_tower_bn_.forward(reg_tower1_.forward(corr_r), training));
  reg = autograd::exp_clamped(reg_tower2_.forward(reg), kRegClamp);

  return ResponsePair{cls, reg};
}

SiamHead::SiamHead(nn::ParamStore& store, const std::string& prefix, int channels, nn::InitRng& rng)
    : shallow_(store, prefix + ".shallow", channels, rng),
      deep_(store, prefix + ".deep", channels, rng) {
  fusion_.alpha_s = store.param(prefix + ".fusion.alpha_s", Tensor({1}, 0.5));
  fusion_.alpha_d = store.param(prefix + ".fusion.alpha_d", Tensor({1}, 0.5));
  fusion_.beta_s = store.param(prefix + ".fusion.beta_s", Tensor({1}, 0.5));
  fusion_.beta_d = store.param(prefix + ".fusion.beta_d", Tensor({1}, 0.5));
}

ResponsePair SiamHead::forward(const TwofoldFeatures& z, const TwofoldFeatures& x,
                               bool training) const {
  ResponsePair s = shallow_.forward(z.shallow, x.shallow, training);
  ResponsePair d = deep_.forward(z.deep, x.deep, training);
  return fuse_responses(s, d, fusion_);
}

ResponsePair fuse_responses(const ResponsePair& shallow, const ResponsePair& deep,
                            const FusionWeights& w) {
  if (!shallow.cls->value.same_shape(deep.cls->value) ||
      !shallow.reg->value.same_shape(deep.reg->value))
    throw std::invalid_argument("fuse_responses: depth maps disagree on shape");
  ResponsePair out;
  out.cls = autograd::add(autograd::scale_by(shallow.cls, w.alpha_s),
                          autograd::scale_by(deep.cls, w.alpha_d));
  out.reg = autograd::add(autograd::scale_by(shallow.reg, w.beta_s),
                          autograd::scale_by(deep.reg, w.beta_d));
  return out;
}

Box decode_box_at(const Tensor& reg, int i, int j, const ResponseGeometry& geom,
                  const CropSpec& crop) {
  const long plane = static_cast<long>(geom.rows) * geom.cols;
  const long at = static_cast<long>(i) * geom.cols + j;
  const double l = reg[at], t = reg[plane + at], r = reg[2 * plane + at], b = reg[3 * plane + at];
  const double ax = geom.anchor_x(j), ay = geom.anchor_y(i);
  Box patch_box = Box::from_corner(ax - l, ay - t, ax + r, ay + b);
  patch_box.w = std::max(patch_box.w, 1.0);
  patch_box.h = std::max(patch_box.h, 1.0);
  return crop.patch_to_frame(patch_box);
}

std::vector<Box> decode_boxes(const Tensor& reg, const ResponseGeometry& geom,
                              const CropSpec& crop) {
  if (reg.ndim() == 4 && reg.dim(0) != 1)
    throw std::invalid_argument("decode_boxes: single-sample maps expected");
  std::vector<Box> out;
  out.reserve(static_cast<size_t>(geom.rows) * geom.cols);
  for (int i = 0; i < geom.rows; ++i)
    for (int j = 0; j < geom.cols; ++j) out.push_back(decode_box_at(reg, i, j, geom, crop));
  return out;
}

}  // namespace tsf
