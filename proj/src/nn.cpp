#include "tsf/nn.hpp"

#include <cmath>

namespace tsf::nn {

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride, int pad, int dilation, bool bias, InitRng& rng) {
  Tensor w({out_ch, in_ch, kernel, kernel});
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * kernel * kernel));
  for (long i = 0; i < w.numel(); ++i) w[i] = rng.normal(stddev);
  w_ = store.param(name + ".weight", std::move(w));
  if (bias) b_ = store.param(name + ".bias", Tensor({out_ch}));
  spec_ = kernels::ConvSpec{stride, pad, dilation};
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& name, int channels) {
  gamma_ = store.param(name + ".gamma", Tensor({channels}, 1.0));
  beta_ = store.param(name + ".beta", Tensor({channels}, 0.0));
  running_mean_ = store.buffer(name + ".running_mean", Tensor({channels}, 0.0));
  running_var_ = store.buffer(name + ".running_var", Tensor({channels}, 1.0));
}

Var BatchNorm2d::forward(const Var& x, bool training) const {
  if (training) {
    Tensor mean, var;
    Var y = autograd::batchnorm_train(x, gamma_, beta_, mean, var, eps_);
    for (long c = 0; c < mean.numel(); ++c) {
      (*running_mean_)[c] = (1.0 - momentum_) * (*running_mean_)[c] + momentum_ * mean[c];
      (*running_var_)[c] = (1.0 - momentum_) * (*running_var_)[c] + momentum_ * var[c];
    }
    return y;
  }
  return autograd::batchnorm_eval(x, gamma_, beta_, *running_mean_, *running_var_, eps_);
}

Bottleneck::Bottleneck(ParamStore& store, const std::string& name, int in_ch, int planes,
                       int out_ch, int stride, int dilation, bool with_downsample, InitRng& rng) {
  // Stride-2 blocks run the 3x3 unpadded so feature sizes stay odd; dilated
  // blocks pad by the dilation to hold resolution.
  int pad = 2 - stride;
  int dil = dilation;
  if (with_downsample && dilation > 1) {
    dil = dilation / 2;
    pad = dil;
  } else if (dilation > 1) {
    pad = dilation;
  }
  conv1_ = Conv2d(store, name + ".conv1", in_ch, planes, 1, 1, 0, 1, false, rng);
  bn1_ = BatchNorm2d(store, name + ".bn1", planes);
  conv2_ = Conv2d(store, name + ".conv2", planes, planes, 3, stride, pad, dil, false, rng);
  bn2_ = BatchNorm2d(store, name + ".bn2", planes);
  conv3_ = Conv2d(store, name + ".conv3", planes, out_ch, 1, 1, 0, 1, false, rng);
  bn3_ = BatchNorm2d(store, name + ".bn3", out_ch);
  has_down_ = with_downsample;
  if (with_downsample) {
    if (stride == 1 && dilation == 1) {
      down_conv_ = Conv2d(store, name + ".downsample.conv", in_ch, out_ch, 1, 1, 0, 1, false, rng);
    } else if (dilation > 1) {
      down_conv_ = Conv2d(store, name + ".downsample.conv", in_ch, out_ch, 3, stride, dilation / 2,
                          dilation / 2, false, rng);
    } else {
      down_conv_ = Conv2d(store, name + ".downsample.conv", in_ch, out_ch, 3, stride, 0, 1, false, rng);
    }
    down_bn_ = BatchNorm2d(store, name + ".downsample.bn", out_ch);
  }
}

Var Bottleneck::forward(const Var& x, bool training) const {
  Var h = autograd::relu(bn1_.forward(conv1_.forward(x), training));
  h = autograd::relu(bn2_.forward(conv2_.forward(h), training));
  h = bn3_.forward(conv3_.forward(h), training);
  Var identity = has_down_ ? down_bn_.forward(down_conv_.forward(x), training) : x;
  return autograd::relu(autograd::add(h, identity));
}

}  // namespace tsf::nn
