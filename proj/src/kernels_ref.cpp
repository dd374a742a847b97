#include "tsf/kernels.hpp"

// Plain serial versions of the hot kernels. Loop nests mirror the parallel
// builds tap-for-tap so outputs are bit-identical, which lets the tests
// assert exact equality instead of tolerances.

namespace tsf::kernels_ref {

using tsf::Tensor;
using tsf::kernels::ConvSpec;
using tsf::kernels::conv_out_size;

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = a[static_cast<long>(i) * k + kk];
      const double* bk = b + static_cast<long>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& s) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int Ho = conv_out_size(H, KH, s), Wo = conv_out_size(W, KW, s);
  Tensor y({N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < Ci; ++ci)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * s.stride - s.pad + kh * s.dilation;
                const int iw = ow * s.stride - s.pad + kw * s.dilation;
                const double xv = (ih >= 0 && ih < H && iw >= 0 && iw < W) ? x.at(n, ci, ih, iw) : 0.0;
                acc += w.at(co, ci, kh, kw) * xv;
              }
          if (b.defined() && b.numel() > 0) acc += b[co];
          y.at(n, co, oh, ow) = acc;
        }
  return y;
}

Tensor conv2d_backward_data(const Tensor& gy, const Tensor& w, int H, int W, const ConvSpec& s) {
  const int N = gy.dim(0), Co = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int Ci = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  Tensor gx({N, Ci, H, W});
  // Tap-major accumulation, matching gemm + col2im in the parallel build:
  // per (ci,kh,kw) tap the sum over co happens first, then taps are added.
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Ci; ++ci)
      for (int kh = 0; kh < KH; ++kh)
        for (int kw = 0; kw < KW; ++kw)
          for (int oh = 0; oh < Ho; ++oh) {
            const int ih = oh * s.stride - s.pad + kh * s.dilation;
            if (ih < 0 || ih >= H) continue;
            for (int ow = 0; ow < Wo; ++ow) {
              const int iw = ow * s.stride - s.pad + kw * s.dilation;
              if (iw < 0 || iw >= W) continue;
              double acc = 0.0;
              for (int co = 0; co < Co; ++co) acc += w.at(co, ci, kh, kw) * gy.at(n, co, oh, ow);
              gx.at(n, ci, ih, iw) += acc;
            }
          }
  return gx;
}

void conv2d_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb,
                             const ConvSpec& s) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int KH = gw.dim(2), KW = gw.dim(3);
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co)
      for (int ci = 0; ci < Ci; ++ci)
        for (int kh = 0; kh < KH; ++kh)
          for (int kw = 0; kw < KW; ++kw) {
            double acc = 0.0;
            for (int oh = 0; oh < Ho; ++oh) {
              const int ih = oh * s.stride - s.pad + kh * s.dilation;
              if (ih < 0 || ih >= H) continue;
              for (int ow = 0; ow < Wo; ++ow) {
                const int iw = ow * s.stride - s.pad + kw * s.dilation;
                if (iw < 0 || iw >= W) continue;
                acc += gy.at(n, co, oh, ow) * x.at(n, ci, ih, iw);
              }
            }
            gw.at(co, ci, kh, kw) += acc;
          }
  }
  if (gb.defined() && gb.numel() > 0)
    for (int co = 0; co < Co; ++co) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) acc += gy.at(n, co, oh, ow);
      gb[co] += acc;
    }
}

Tensor xcorr_depthwise(const Tensor& z, const Tensor& x) {
  const int N = z.dim(0), C = z.dim(1), kh = z.dim(2), kw = z.dim(3);
  const int Sh = x.dim(2), Sw = x.dim(3);
  const int Ho = Sh - kh + 1, Wo = Sw - kw + 1;
  Tensor y({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int u = 0; u < Ho; ++u)
        for (int v = 0; v < Wo; ++v) {
          double s = 0.0;
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) s += z.at(n, c, i, j) * x.at(n, c, u + i, v + j);
          y.at(n, c, u, v) = s;
        }
  return y;
}

}  // namespace tsf::kernels_ref
