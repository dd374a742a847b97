#include "tsf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace tsf::kernels {

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + static_cast<long>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      const double* bk = b + static_cast<long>(kk) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

namespace {

// col: (Ci*kh*kw) x (Ho*Wo)
void im2col(const double* x, int C, int H, int W, int KH, int KW, const ConvSpec& s, int Ho,
            int Wo, double* col) {
  const long L = static_cast<long>(Ho) * Wo;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < C * KH * KW; ++r) {
    const int ci = r / (KH * KW);
    const int kh = (r / KW) % KH;
    const int kw = r % KW;
    double* dst = col + static_cast<long>(r) * L;
    const double* src = x + static_cast<long>(ci) * H * W;
    for (int oh = 0; oh < Ho; ++oh) {
      const int ih = oh * s.stride - s.pad + kh * s.dilation;
      for (int ow = 0; ow < Wo; ++ow) {
        const int iw = ow * s.stride - s.pad + kw * s.dilation;
        dst[static_cast<long>(oh) * Wo + ow] =
            (ih >= 0 && ih < H && iw >= 0 && iw < W) ? src[static_cast<long>(ih) * W + iw] : 0.0;
      }
    }
  }
}

void col2im(const double* col, int C, int H, int W, int KH, int KW, const ConvSpec& s, int Ho,
            int Wo, double* x) {
  const long L = static_cast<long>(Ho) * Wo;
  std::memset(x, 0, sizeof(double) * static_cast<size_t>(C) * H * W);
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < C; ++ci) {
    double* dst = x + static_cast<long>(ci) * H * W;
    for (int kh = 0; kh < KH; ++kh) {
      for (int kw = 0; kw < KW; ++kw) {
        const long r = (static_cast<long>(ci) * KH + kh) * KW + kw;
        const double* src = col + r * L;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * s.stride - s.pad + kh * s.dilation;
          if (ih < 0 || ih >= H) continue;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * s.stride - s.pad + kw * s.dilation;
            if (iw < 0 || iw >= W) continue;
            dst[static_cast<long>(ih) * W + iw] += src[static_cast<long>(oh) * Wo + ow];
          }
        }
      }
    }
  }
}

void conv_check(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec) {
  if (x.ndim() != 4 || w.ndim() != 4) throw std::invalid_argument("conv2d: rank-4 tensors required");
  if (x.dim(1) != w.dim(1)) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.defined() && b.numel() != w.dim(0)) throw std::invalid_argument("conv2d: bad bias size");
  if (conv_out_size(x.dim(2), w.dim(2), spec) <= 0 || conv_out_size(x.dim(3), w.dim(3), spec) <= 0)
    throw std::invalid_argument("conv2d: input too small for kernel/stride plan");
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec) {
  conv_check(x, w, b, spec);
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int Ho = conv_out_size(H, KH, spec), Wo = conv_out_size(W, KW, spec);
  const int K = Ci * KH * KW;
  const long L = static_cast<long>(Ho) * Wo;

  Tensor y({N, Co, Ho, Wo});
  std::vector<double> col(static_cast<size_t>(K) * L);
  for (int n = 0; n < N; ++n) {
    im2col(x.data() + static_cast<long>(n) * Ci * H * W, Ci, H, W, KH, KW, spec, Ho, Wo, col.data());
    gemm(w.data(), col.data(), y.data() + static_cast<long>(n) * Co * L, Co, K, static_cast<int>(L),
         false);
  }
  if (b.defined() && b.numel() > 0) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Co; ++co) {
        double* yp = y.data() + (static_cast<long>(n) * Co + co) * L;
        const double bv = b[co];
#pragma omp simd
        for (long j = 0; j < L; ++j) yp[j] += bv;
      }
  }
  return y;
}

Tensor conv2d_backward_data(const Tensor& gy, const Tensor& w, int H, int W, const ConvSpec& spec) {
  const int N = gy.dim(0), Co = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int Ci = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  const int K = Ci * KH * KW;
  const long L = static_cast<long>(Ho) * Wo;

  // wt: (K x Co)
  std::vector<double> wt(static_cast<size_t>(K) * Co);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < K; ++r)
    for (int co = 0; co < Co; ++co) wt[static_cast<long>(r) * Co + co] = w[static_cast<long>(co) * K + r];

  Tensor gx({N, Ci, H, W});
  std::vector<double> colg(static_cast<size_t>(K) * L);
  for (int n = 0; n < N; ++n) {
    gemm(wt.data(), gy.data() + static_cast<long>(n) * Co * L, colg.data(), K, Co,
         static_cast<int>(L), false);
    col2im(colg.data(), Ci, H, W, KH, KW, spec, Ho, Wo,
           gx.data() + static_cast<long>(n) * Ci * H * W);
  }
  return gx;
}

void conv2d_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb,
                             const ConvSpec& spec) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int KH = gw.dim(2), KW = gw.dim(3);
  const int K = Ci * KH * KW;
  const long L = static_cast<long>(Ho) * Wo;

  std::vector<double> col(static_cast<size_t>(K) * L);
  for (int n = 0; n < N; ++n) {
    im2col(x.data() + static_cast<long>(n) * Ci * H * W, Ci, H, W, KH, KW, spec, Ho, Wo, col.data());
    const double* g = gy.data() + static_cast<long>(n) * Co * L;
    // gw[co][r] += sum_j g[co][j] * col[r][j]
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Co; ++co) {
      const double* gc = g + static_cast<long>(co) * L;
      double* gwrow = gw.data() + static_cast<long>(co) * K;
      for (int r = 0; r < K; ++r) {
        const double* cr = col.data() + static_cast<long>(r) * L;
        double s = 0.0;
        for (long j = 0; j < L; ++j) s += gc[j] * cr[j];
        gwrow[r] += s;
      }
    }
  }
  if (gb.defined() && gb.numel() > 0) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Co; ++co) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* gc = gy.data() + (static_cast<long>(n) * Co + co) * L;
        for (long j = 0; j < L; ++j) s += gc[j];
      }
      gb[co] += s;
    }
  }
}

Tensor xcorr_depthwise(const Tensor& z, const Tensor& x) {
  if (z.ndim() != 4 || x.ndim() != 4) throw std::invalid_argument("xcorr: rank-4 tensors required");
  if (z.dim(0) != x.dim(0) || z.dim(1) != x.dim(1))
    throw std::invalid_argument("xcorr: batch/channel mismatch");
  const int N = z.dim(0), C = z.dim(1), kh = z.dim(2), kw = z.dim(3);
  const int Sh = x.dim(2), Sw = x.dim(3);
  if (kh > Sh || kw > Sw) throw std::invalid_argument("xcorr: template larger than search");
  const int Ho = Sh - kh + 1, Wo = Sw - kw + 1;
  Tensor y({N, C, Ho, Wo});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* zp = z.data() + (static_cast<long>(n) * C + c) * kh * kw;
      const double* xp = x.data() + (static_cast<long>(n) * C + c) * Sh * Sw;
      double* yp = y.data() + (static_cast<long>(n) * C + c) * Ho * Wo;
      for (int u = 0; u < Ho; ++u)
        for (int v = 0; v < Wo; ++v) {
          double s = 0.0;
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j)
              s += zp[i * kw + j] * xp[static_cast<long>(u + i) * Sw + (v + j)];
          yp[static_cast<long>(u) * Wo + v] = s;
        }
    }
  return y;
}

Tensor xcorr_backward_z(const Tensor& gy, const Tensor& x, int k) {
  const int N = gy.dim(0), C = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int Sh = x.dim(2), Sw = x.dim(3);
  Tensor gz({N, C, k, k});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* gp = gy.data() + (static_cast<long>(n) * C + c) * Ho * Wo;
      const double* xp = x.data() + (static_cast<long>(n) * C + c) * Sh * Sw;
      double* zp = gz.data() + (static_cast<long>(n) * C + c) * k * k;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          double s = 0.0;
          for (int u = 0; u < Ho; ++u)
            for (int v = 0; v < Wo; ++v)
              s += gp[static_cast<long>(u) * Wo + v] * xp[static_cast<long>(u + i) * Sw + (v + j)];
          zp[i * k + j] = s;
        }
    }
  return gz;
}

Tensor xcorr_backward_x(const Tensor& gy, const Tensor& z, int S) {
  const int N = gy.dim(0), C = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
  const int kh = z.dim(2), kw = z.dim(3);
  Tensor gx({N, C, S, S});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* gp = gy.data() + (static_cast<long>(n) * C + c) * Ho * Wo;
      const double* zp = z.data() + (static_cast<long>(n) * C + c) * kh * kw;
      double* xp = gx.data() + (static_cast<long>(n) * C + c) * S * S;
      for (int i = 0; i < kh; ++i)
        for (int j = 0; j < kw; ++j) {
          const double zv = zp[i * kw + j];
          for (int u = 0; u < Ho; ++u)
            for (int v = 0; v < Wo; ++v)
              xp[static_cast<long>(u + i) * S + (v + j)] += zv * gp[static_cast<long>(u) * Wo + v];
        }
    }
  return gx;
}

Tensor maxpool_forward(const Tensor& x, int kernel, int stride, int pad, std::vector<long>& argmax) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  ConvSpec s{stride, pad, 1};
  const int Ho = conv_out_size(H, kernel, s), Wo = conv_out_size(W, kernel, s);
  Tensor y({N, C, Ho, Wo});
  argmax.assign(static_cast<size_t>(y.numel()), -1);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long xoff = (static_cast<long>(n) * C + c) * H * W;
      const double* xp = x.data() + xoff;
      const long yoff = (static_cast<long>(n) * C + c) * Ho * Wo;
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          long besti = -1;
          for (int i = 0; i < kernel; ++i) {
            const int ih = oh * stride - pad + i;
            if (ih < 0 || ih >= H) continue;
            for (int j = 0; j < kernel; ++j) {
              const int iw = ow * stride - pad + j;
              if (iw < 0 || iw >= W) continue;
              const double v = xp[static_cast<long>(ih) * W + iw];
              if (v > best) {
                best = v;
                besti = xoff + static_cast<long>(ih) * W + iw;
              }
            }
          }
          y[yoff + static_cast<long>(oh) * Wo + ow] = best;
          argmax[static_cast<size_t>(yoff + static_cast<long>(oh) * Wo + ow)] = besti;
        }
    }
  return y;
}

Tensor maxpool_backward(const Tensor& gy, const std::vector<long>& argmax,
                        const std::vector<int>& xshape) {
  Tensor gx(xshape);
  const int N = gy.dim(0), C = gy.dim(1);
  const long plane_out = static_cast<long>(gy.dim(2)) * gy.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long yoff = (static_cast<long>(n) * C + c) * plane_out;
      for (long j = 0; j < plane_out; ++j) {
        const long src = argmax[static_cast<size_t>(yoff + j)];
        if (src >= 0) gx[src] += gy[yoff + j];
      }
    }
  return gx;
}

void channel_stats(const Tensor& x, Tensor& mean, Tensor& var) {
  const int N = x.dim(0), C = x.dim(1);
  const long plane = static_cast<long>(x.dim(2)) * x.dim(3);
  const long M = static_cast<long>(N) * plane;
  mean = Tensor({C});
  var = Tensor({C});
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* p = x.data() + (static_cast<long>(n) * C + c) * plane;
      for (long j = 0; j < plane; ++j) s += p[j];
    }
    const double mu = s / static_cast<double>(M);
    double v = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* p = x.data() + (static_cast<long>(n) * C + c) * plane;
      for (long j = 0; j < plane; ++j) {
        const double d = p[j] - mu;
        v += d * d;
      }
    }
    mean[c] = mu;
    var[c] = v / static_cast<double>(M);
  }
}

double bilinear_at(const double* plane, int H, int W, double y, double x, double pad) {
  // Pixel (i,j) has center (j+0.5, i+0.5).
  const double fy = y - 0.5, fx = x - 0.5;
  const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
  const double wy = fy - y0, wx = fx - x0;
  auto tap = [&](int yy, int xx) -> double {
    return (yy >= 0 && yy < H && xx >= 0 && xx < W) ? plane[static_cast<long>(yy) * W + xx] : pad;
  };
  const double v00 = tap(y0, x0), v01 = tap(y0, x0 + 1);
  const double v10 = tap(y0 + 1, x0), v11 = tap(y0 + 1, x0 + 1);
  return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11);
}

}  // namespace tsf::kernels
