#include "tsf/backbone.hpp"

namespace tsf {

using autograd::Var;

namespace {

std::vector<nn::Bottleneck> make_stage(nn::ParamStore& store, const std::string& name, int blocks,
                                       int in_ch, int planes, int out_ch, int stride, int dilation,
                                       nn::InitRng& rng) {
  std::vector<nn::Bottleneck> stage;
  stage.reserve(static_cast<size_t>(blocks));
  stage.emplace_back(store, name + ".0", in_ch, planes, out_ch, stride, dilation, true, rng);
  for (int i = 1; i < blocks; ++i)
    stage.emplace_back(store, name + "." + std::to_string(i), out_ch, planes, out_ch, 1, dilation,
                       false, rng);
  return stage;
}

Var run_stage(const std::vector<nn::Bottleneck>& stage, Var x, bool training) {
  for (const auto& b : stage) x = b.forward(x, training);
  return x;
}

}  // namespace

TwofoldBackbone::TwofoldBackbone(nn::ParamStore& store, const std::string& prefix,
                                 const BackboneConfig& cfg, nn::InitRng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const auto& ch = cfg_.stage_channels;
  const int stem = cfg_.stem_channels;
  stem_conv_ = nn::Conv2d(store, prefix + ".stem.conv", 3, stem, 7, 2, 0, 1, false, rng);
  stem_bn_ = nn::BatchNorm2d(store, prefix + ".stem.bn", stem);
  layer1_ = make_stage(store, prefix + ".layer1", 3, stem, ch[0] / 4, ch[0], 1, 1, rng);
  layer2_ = make_stage(store, prefix + ".layer2", 4, ch[0], ch[1] / 4, ch[1], 2, 1, rng);
  layer3_ = make_stage(store, prefix + ".layer3", 6, ch[1], ch[2] / 4, ch[2], 1, 2, rng);
  layer4_ = make_stage(store, prefix + ".layer4", 3, ch[2], ch[3] / 4, ch[3], 1, 4, rng);

  const int f = cfg_.fused_channels;
  ds1_ = nn::Conv2d(store, prefix + ".fuse.ds1.conv", ch[0], f, 1, 1, 0, 1, false, rng);
  ds1_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.ds1.bn", f);
  ds2_ = nn::Conv2d(store, prefix + ".fuse.ds2.conv", ch[1], f, 1, 1, 0, 1, false, rng);
  ds2_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.ds2.bn", f);
  ds3_ = nn::Conv2d(store, prefix + ".fuse.ds3.conv", ch[2], f, 1, 1, 0, 1, false, rng);
  ds3_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.ds3.bn", f);
  ds4_ = nn::Conv2d(store, prefix + ".fuse.ds4.conv", ch[3], f, 1, 1, 0, 1, false, rng);
  ds4_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.ds4.bn", f);
  ds_shallow_ = nn::Conv2d(store, prefix + ".fuse.shallow.conv", 2 * f, f, 1, 1, 0, 1, false, rng);
  ds_shallow_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.shallow.bn", f);
  ds_deep_ = nn::Conv2d(store, prefix + ".fuse.deep.conv", 2 * f, f, 1, 1, 0, 1, false, rng);
  ds_deep_bn_ = nn::BatchNorm2d(store, prefix + ".fuse.deep.bn", f);
}

StageFeatures TwofoldBackbone::extract_stages(const Var& img_patch, bool training) const {
  const int H = img_patch->value.dim(2), W = img_patch->value.dim(3);
  if (H != W) throw std::invalid_argument("extract_stages: square input required");
  if (BackboneConfig::stage2_spatial(H) < 1)
    throw std::invalid_argument("extract_stages: input too small for the stride plan");
  Var x = autograd::relu(stem_bn_.forward(stem_conv_.forward(img_patch), training));
  x = autograd::maxpool(x, 3, 2, 1);
  StageFeatures s;
  s.f1 = run_stage(layer1_, x, training);
  s.f2 = run_stage(layer2_, s.f1, training);
  s.f3 = run_stage(layer3_, s.f2, training);
  s.f4 = run_stage(layer4_, s.f3, training);
  return s;
}

TwofoldFeatures TwofoldBackbone::fuse_twofold(const StageFeatures& stages, Branch branch,
                                              bool training) const {
  const int s2 = stages.f2->value.dim(2);
  if (stages.f3->value.dim(2) != s2 || stages.f4->value.dim(2) != s2)
    throw std::invalid_argument("fuse_twofold: stage features disagree on spatial size");
  const int out_spatial = branch == Branch::kTemplate ? cfg_.template_spatial : s2;
  if (out_spatial > s2)
    throw std::invalid_argument("fuse_twofold: template_spatial exceeds stage-2 resolution");

  auto crop_to = [](const Var& v, int size) {
    return v->value.dim(2) == size ? v : autograd::center_crop(v, size, size);
  };

  // F1 runs at twice the stage-2 resolution; the inner crop aligns it before
  // the 1x1 reduction. The outer crops apply on the template branch only.
  Var a = crop_to(stages.f1, s2);
  a = ds1_bn_.forward(ds1_.forward(a), training);
  a = crop_to(a, out_spatial);
  Var b = ds2_bn_.forward(ds2_.forward(stages.f2), training);
  b = crop_to(b, out_spatial);
  Var shallow = ds_shallow_bn_.forward(ds_shallow_.forward(autograd::concat_channels({a, b})), training);

  Var c = ds3_bn_.forward(ds3_.forward(stages.f3), training);
  c = crop_to(c, out_spatial);
  Var d = ds4_bn_.forward(ds4_.forward(stages.f4), training);
  d = crop_to(d, out_spatial);
  Var deep = ds_deep_bn_.forward(ds_deep_.forward(autograd::concat_channels({c, d})), training);

  return TwofoldFeatures{shallow, deep};
}

TwofoldFeatures TwofoldBackbone::forward(const Var& img_patch, Branch branch, bool training) const {
  return fuse_twofold(extract_stages(img_patch, training), branch, training);
}

Tensor image_to_input(const Image& img) {
  if (!img.valid()) throw std::invalid_argument("image_to_input: malformed image");
  Tensor t({1, 3, img.height, img.width});
  const long plane = static_cast<long>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    const double* src = img.plane(img.channels == 3 ? c : 0);
    std::copy(src, src + plane, t.data() + static_cast<long>(c) * plane);
  }
  return t;
}

}  // namespace tsf
