#pragma once

#include "tsf/tensor.hpp"

// Low-level compute kernels. The functions in tsf::kernels are the OpenMP
// builds used by the library; tsf::kernels_ref holds plain serial versions
// of the hot ones, kept as the reference the tests and the benchmark tool
// compare against. Both sides accumulate in the same order, so results match
// exactly, not just to tolerance.

namespace tsf::kernels {

struct ConvSpec {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

inline int conv_out_size(int in, int kernel, const ConvSpec& s) {
  return (in + 2 * s.pad - s.dilation * (kernel - 1) - 1) / s.stride + 1;
}

// C[m x n] += A[m x k] * B[k x n], row-major. `accumulate=false` overwrites C.
void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// x: (N,Ci,H,W), w: (Co,Ci,kh,kw), b: (Co) or empty -> y: (N,Co,Ho,Wo)
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec);
Tensor conv2d_backward_data(const Tensor& gy, const Tensor& w, int H, int W, const ConvSpec& spec);
void conv2d_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb,
                             const ConvSpec& spec);

// Per-channel valid cross-correlation, no channel mixing.
// z: (N,C,k,k), x: (N,C,S,S) -> (N,C,S-k+1,S-k+1)
Tensor xcorr_depthwise(const Tensor& z, const Tensor& x);
Tensor xcorr_backward_z(const Tensor& gy, const Tensor& x, int k);
Tensor xcorr_backward_x(const Tensor& gy, const Tensor& z, int S);

// Max pooling with argmax capture for the backward pass.
Tensor maxpool_forward(const Tensor& x, int kernel, int stride, int pad, std::vector<long>& argmax);
Tensor maxpool_backward(const Tensor& gy, const std::vector<long>& argmax, const std::vector<int>& xshape);

// Per-channel mean/var over (N,H,W) of a rank-4 tensor.
void channel_stats(const Tensor& x, Tensor& mean, Tensor& var);

// Bilinear sampling of one channel plane (H x W) at continuous pixel-center
// coordinates; out-of-frame taps read `pad`.
double bilinear_at(const double* plane, int H, int W, double y, double x, double pad);

}  // namespace tsf::kernels

namespace tsf::kernels_ref {

// Serial reference implementations (direct loops, no OpenMP, no im2col).
tsf::Tensor conv2d_forward(const tsf::Tensor& x, const tsf::Tensor& w, const tsf::Tensor& b,
                           const tsf::kernels::ConvSpec& spec);
tsf::Tensor conv2d_backward_data(const tsf::Tensor& gy, const tsf::Tensor& w, int H, int W,
                                 const tsf::kernels::ConvSpec& spec);
void conv2d_backward_weights(const tsf::Tensor& gy, const tsf::Tensor& x, tsf::Tensor& gw,
                             tsf::Tensor& gb, const tsf::kernels::ConvSpec& spec);
tsf::Tensor xcorr_depthwise(const tsf::Tensor& z, const tsf::Tensor& x);
void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

}  // namespace tsf::kernels_ref
