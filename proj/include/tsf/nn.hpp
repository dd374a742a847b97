#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tsf/autograd.hpp"

namespace tsf::nn {

using autograd::Var;

// Flat registry of named parameters and buffers; the checkpoint archive is a
// dump of exactly these entries. Names follow module paths,
// e.g. "backbone.layer3.2.conv1.weight".
class ParamStore {
 public:
  Var param(const std::string& name, Tensor init) {
    auto v = autograd::leaf(std::move(init), true);
    params_.emplace_back(name, v);
    return v;
  }
  std::shared_ptr<Tensor> buffer(const std::string& name, Tensor init) {
    auto t = std::make_shared<Tensor>(std::move(init));
    buffers_.emplace_back(name, t);
    return t;
  }
  const std::vector<std::pair<std::string, Var>>& params() const { return params_; }
  const std::vector<std::pair<std::string, std::shared_ptr<Tensor>>>& buffers() const {
    return buffers_;
  }
  std::vector<Var> param_vars() const {
    std::vector<Var> out;
    out.reserve(params_.size());
    for (const auto& [n, v] : params_) out.push_back(v);
    return out;
  }
  Var find(const std::string& name) const {
    for (const auto& [n, v] : params_)
      if (n == name) return v;
    return nullptr;
  }

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::vector<std::pair<std::string, std::shared_ptr<Tensor>>> buffers_;
};

struct InitRng {
  std::mt19937_64 gen;
  explicit InitRng(unsigned long long seed) : gen(seed) {}
  double normal(double stddev) { return std::normal_distribution<double>(0.0, stddev)(gen); }
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kernel, int stride,
         int pad, int dilation, bool bias, InitRng& rng);

  Var forward(const Var& x) const { return autograd::conv2d(x, w_, b_, spec_); }
  Var weight() const { return w_; }
  Var bias() const { return b_; }

 private:
  Var w_, b_;
  kernels::ConvSpec spec_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& store, const std::string& name, int channels);

  // training=true normalizes by batch statistics and folds them into the
  // running buffers; training=false uses the stored running statistics.
  Var forward(const Var& x, bool training) const;
  Var gamma() const { return gamma_; }

 private:
  Var gamma_, beta_;
  std::shared_ptr<Tensor> running_mean_, running_var_;
  double eps_ = 1e-5;
  double momentum_ = 0.1;
};

// conv + bn with the usual three-conv residual body.
class Bottleneck {
 public:
  Bottleneck() = default;
  Bottleneck(ParamStore& store, const std::string& name, int in_ch, int planes, int out_ch,
             int stride, int dilation, bool with_downsample, InitRng& rng);

  Var forward(const Var& x, bool training) const;

 private:
  Conv2d conv1_, conv2_, conv3_, down_conv_;
  BatchNorm2d bn1_, bn2_, bn3_, down_bn_;
  bool has_down_ = false;
};

}  // namespace tsf::nn
