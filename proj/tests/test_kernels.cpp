#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "tsf/kernels.hpp"

using namespace tsf;
using kernels::ConvSpec;

TEST_CASE("gemm matches serial reference exactly") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(gen() % 20);
    const int k = 1 + static_cast<int>(gen() % 20);
    const int n = 1 + static_cast<int>(gen() % 30);
    Tensor a = tsft::random_tensor({m, k}, gen), b = tsft::random_tensor({k, n}, gen);
    Tensor c0({m, n}), c1({m, n});
    kernels_ref::gemm(a.data(), b.data(), c0.data(), m, k, n, false);
    kernels::gemm(a.data(), b.data(), c1.data(), m, k, n, false);
    CHECK(tsft::bit_equal(c0, c1));
  }
}

TEST_CASE("conv2d forward matches serial reference exactly") {
  std::mt19937_64 gen(37);
  for (int stride : {1, 2})
    for (int pad : {0, 1, 2})
      for (int dil : {1, 2})
        for (int k : {1, 3}) {
          const ConvSpec spec{stride, pad, dil};
          const int H = 9;
          if (kernels::conv_out_size(H, k, spec) < 1) continue;
          Tensor x = tsft::random_tensor({2, 3, H, H}, gen);
          Tensor w = tsft::random_tensor({4, 3, k, k}, gen);
          Tensor b = tsft::random_tensor({4}, gen);
          CHECK(tsft::bit_equal(kernels_ref::conv2d_forward(x, w, b, spec),
                                kernels::conv2d_forward(x, w, b, spec)));
          CHECK(tsft::bit_equal(kernels_ref::conv2d_forward(x, w, Tensor(), spec),
                                kernels::conv2d_forward(x, w, Tensor(), spec)));
        }
}

TEST_CASE("conv2d backward matches serial reference exactly") {
  std::mt19937_64 gen(41);
  for (int stride : {1, 2})
    for (int pad : {0, 1})
      for (int dil : {1, 2}) {
        const ConvSpec spec{stride, pad, dil};
        const int H = 9, k = 3;
        if (kernels::conv_out_size(H, k, spec) < 1) continue;
        Tensor x = tsft::random_tensor({2, 3, H, H}, gen);
        Tensor w = tsft::random_tensor({4, 3, k, k}, gen);
        Tensor y = kernels::conv2d_forward(x, w, Tensor(), spec);
        Tensor gy = tsft::random_tensor(y.shape(), gen);

        CHECK(tsft::bit_equal(kernels_ref::conv2d_backward_data(gy, w, H, H, spec),
                              kernels::conv2d_backward_data(gy, w, H, H, spec)));

        Tensor gw0({4, 3, k, k}), gb0({4}), gw1({4, 3, k, k}), gb1({4});
        kernels_ref::conv2d_backward_weights(gy, x, gw0, gb0, spec);
        kernels::conv2d_backward_weights(gy, x, gw1, gb1, spec);
        CHECK(tsft::bit_equal(gw0, gw1));
        CHECK(tsft::bit_equal(gb0, gb1));
      }
}

TEST_CASE("conv2d rejects bad geometry") {
  std::mt19937_64 gen(43);
  Tensor x = tsft::random_tensor({1, 3, 5, 5}, gen);
  Tensor w = tsft::random_tensor({2, 3, 7, 7}, gen);
  CHECK_THROWS(kernels::conv2d_forward(x, w, Tensor(), ConvSpec{1, 0, 1}));
  Tensor w2 = tsft::random_tensor({2, 4, 3, 3}, gen);
  CHECK_THROWS(kernels::conv2d_forward(x, w2, Tensor(), ConvSpec{1, 0, 1}));
}

TEST_CASE("depthwise xcorr matches serial reference and brute force") {
  std::mt19937_64 gen(47);
  for (int rep = 0; rep < 30; ++rep) {
    const int C = 1 + static_cast<int>(gen() % 4);
    const int k = 1 + static_cast<int>(gen() % 4);
    const int S = k + static_cast<int>(gen() % 5);
    Tensor z = tsft::random_int_tensor({1, C, k, k}, gen);
    Tensor x = tsft::random_int_tensor({1, C, S, S}, gen);
    Tensor got = kernels::xcorr_depthwise(z, x);
    CHECK(tsft::bit_equal(got, kernels_ref::xcorr_depthwise(z, x)));
    // independent triple-loop oracle
    for (int c = 0; c < C; ++c)
      for (int u = 0; u <= S - k; ++u)
        for (int v = 0; v <= S - k; ++v) {
          double s = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) s += z.at(0, c, i, j) * x.at(0, c, u + i, v + j);
          CHECK(got.at(0, c, u, v) == s);
        }
  }
  Tensor z = tsft::random_tensor({1, 1, 5, 5}, gen);
  Tensor x = tsft::random_tensor({1, 1, 3, 3}, gen);
  CHECK_THROWS(kernels::xcorr_depthwise(z, x));
}

TEST_CASE("maxpool forward/backward against direct reasoning") {
  std::mt19937_64 gen(53);
  Tensor x = tsft::random_tensor({1, 2, 7, 7}, gen);
  std::vector<long> argmax;
  Tensor y = kernels::maxpool_forward(x, 3, 2, 1, argmax);
  CHECK(y.dim(2) == 4);
  CHECK(y.dim(3) == 4);
  for (int c = 0; c < 2; ++c)
    for (int oh = 0; oh < 4; ++oh)
      for (int ow = 0; ow < 4; ++ow) {
        double best = -1e300;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int ih = oh * 2 - 1 + i, iw = ow * 2 - 1 + j;
            if (ih < 0 || ih >= 7 || iw < 0 || iw >= 7) continue;
            best = std::max(best, x.at(0, c, ih, iw));
          }
        CHECK(y.at(0, c, oh, ow) == best);
      }
  Tensor gy(y.shape(), 1.0);
  Tensor gx = kernels::maxpool_backward(gy, argmax, x.shape());
  double sum = 0;
  for (long i = 0; i < gx.numel(); ++i) sum += gx[i];
  CHECK(sum == doctest::Approx(static_cast<double>(y.numel())));
}

TEST_CASE("channel stats") {
  Tensor x({2, 2, 2, 2});
  for (long i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i);
  Tensor mean, var;
  kernels::channel_stats(x, mean, var);
  // channel 0 holds {0,1,2,3, 8,9,10,11}; channel 1 holds {4..7, 12..15}
  CHECK(mean[0] == doctest::Approx(5.5));
  CHECK(mean[1] == doctest::Approx(9.5));
  double v0 = 0;
  for (double d : {0., 1., 2., 3., 8., 9., 10., 11.}) v0 += (d - 5.5) * (d - 5.5);
  CHECK(var[0] == doctest::Approx(v0 / 8.0));
}
