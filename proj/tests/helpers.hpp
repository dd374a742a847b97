#pragma once

#include <functional>
#include <random>

#include "tsf/autograd.hpp"
#include "tsf/backbone.hpp"
#include "tsf/tracker.hpp"

namespace tsft {

inline tsf::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& gen, double lo = -1.0,
                                 double hi = 1.0) {
  tsf::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (long i = 0; i < t.numel(); ++i) t[i] = d(gen);
  return t;
}

inline tsf::Tensor random_int_tensor(std::vector<int> shape, std::mt19937_64& gen, int lo = -4,
                                     int hi = 4) {
  tsf::Tensor t(std::move(shape));
  std::uniform_int_distribution<int> d(lo, hi);
  for (long i = 0; i < t.numel(); ++i) t[i] = d(gen);
  return t;
}

inline double max_abs_diff(const tsf::Tensor& a, const tsf::Tensor& b) {
  double m = 0.0;
  for (long i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const tsf::Tensor& a, const tsf::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (long i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// Central finite differences of a scalar-graph builder against the analytic
// gradients, over every element of every listed leaf. Returns the max
// relative error (relative to max(|analytic|, |numeric|, eps)).
inline double fd_max_rel_err(const std::function<tsf::autograd::Var()>& build,
                             const std::vector<tsf::autograd::Var>& leaves, double h = 1e-6) {
  using tsf::autograd::backward;
  using tsf::autograd::zero_grad;
  zero_grad(leaves);
  backward(build());
  double worst = 0.0;
  for (const auto& leaf : leaves) {
    for (long i = 0; i < leaf->value.numel(); ++i) {
      const double keep = leaf->value[i];
      leaf->value[i] = keep + h;
      const double fp = build()->value.item();
      leaf->value[i] = keep - h;
      const double fm = build()->value.item();
      leaf->value[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = leaf->grad[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

// Small-everything configuration for fast structural tests.
inline tsf::BackboneConfig micro_backbone() {
  tsf::BackboneConfig c;
  c.variant = "tiny";
  c.stage_channels = {8, 16, 24, 32};
  c.stem_channels = 4;
  c.fused_channels = 8;
  c.template_spatial = 3;
  return c;
}

inline tsf::TrackConfig micro_track() {
  tsf::TrackConfig t;
  t.template_size = 31;  // stage-2 spatial 3
  t.instance_size = 47;  // stage-2 spatial 5, response 3x3
  return t;
}

inline tsf::Image ramp_image(int h, int w, int ch = 1) {
  tsf::Image img(h, w, ch);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(c, y, x) = y * w + x + 10.0 * c;
  return img;
}

}  // namespace tsft
