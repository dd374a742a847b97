// Times the OpenMP kernel builds against the serial references and checks
// they agree. Shapes mirror the tracker's hot paths (stage convolutions and
// the depth-wise correlation).

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tsf/kernels.hpp"

using tsf::Tensor;
using tsf::kernels::ConvSpec;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& gen) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (long i = 0; i < t.numel(); ++i) t[i] = d(gen);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (long i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename F>
double time_ms(F f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const std::string& name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-34s %10.3f %10.3f %8.2fx %10.2e\n", name.c_str(), serial_ms, parallel_ms,
              serial_ms / parallel_ms, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP\n");
#endif
  std::printf("%-34s %10s %10s %9s %10s\n", "kernel", "serial ms", "omp ms", "speedup", "max|diff|");

  std::mt19937_64 gen(7);

  struct ConvCase {
    const char* name;
    int N, Ci, H, Co, K;
    ConvSpec spec;
    int reps;
  };
  const ConvCase conv_cases[] = {
      {"conv 3x3 s1 d2 32->64 @15", 1, 32, 15, 64, 3, {1, 2, 2}, 20},
      {"conv 3x3 s2 16->32 @31", 1, 16, 31, 32, 3, {2, 0, 1}, 20},
      {"conv 7x7 s2 3->64 @127", 1, 3, 127, 64, 7, {2, 0, 1}, 5},
      {"conv 1x1 512->256 @15", 1, 512, 15, 256, 1, {1, 0, 1}, 10},
  };
  for (const auto& c : conv_cases) {
    Tensor x = random_tensor({c.N, c.Ci, c.H, c.H}, gen);
    Tensor w = random_tensor({c.Co, c.Ci, c.K, c.K}, gen);
    Tensor b = random_tensor({c.Co}, gen);
    Tensor ys, yp;
    const double ts = time_ms([&] { ys = tsf::kernels_ref::conv2d_forward(x, w, b, c.spec); }, c.reps);
    const double tp = time_ms([&] { yp = tsf::kernels::conv2d_forward(x, w, b, c.spec); }, c.reps);
    row(c.name, ts, tp, max_abs_diff(ys, yp));
  }

  {
    Tensor z = random_tensor({1, 256, 7, 7}, gen);
    Tensor x = random_tensor({1, 256, 31, 31}, gen);
    Tensor ys, yp;
    const double ts = time_ms([&] { ys = tsf::kernels_ref::xcorr_depthwise(z, x); }, 20);
    const double tp = time_ms([&] { yp = tsf::kernels::xcorr_depthwise(z, x); }, 20);
    row("xcorr 256ch 7x7 over 31x31", ts, tp, max_abs_diff(ys, yp));
  }

  {
    const int m = 256, k = 1024, n = 961;
    Tensor a = random_tensor({m, k}, gen);
    Tensor b = random_tensor({k, n}, gen);
    Tensor cs({m, n}), cp({m, n});
    const double ts = time_ms([&] { tsf::kernels_ref::gemm(a.data(), b.data(), cs.data(), m, k, n, false); }, 5);
    const double tp = time_ms([&] { tsf::kernels::gemm(a.data(), b.data(), cp.data(), m, k, n, false); }, 5);
    row("gemm 256x1024x961", ts, tp, max_abs_diff(cs, cp));
  }

  return 0;
}
