// Timing harness comparing the serial reference kernels against the OpenMP
// versions on convolution-sized workloads. Reports median wall time per call
// and the speedup, and cross-checks that both paths produce identical bytes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "icnn/kernels.hpp"
#include "icnn/rng.hpp"

using namespace icnn;
using kernels::Conv2dDims;
using kernels::PoolDims;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double median_seconds(const std::function<void()>& fn, int reps) {
  fn();  // warm caches before timing
  std::vector<double> times(static_cast<size_t>(reps));
  for (auto& t : times) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

int g_mismatches = 0;

void row(const std::string& name, const std::function<void()>& serial,
         const std::function<void()>& parallel,
         const std::vector<double>& out_serial,
         const std::vector<double>& out_parallel, int reps) {
  double ts = median_seconds(serial, reps);
  double tp = median_seconds(parallel, reps);
  bool same = std::memcmp(out_serial.data(), out_parallel.data(),
                          out_serial.size() * sizeof(double)) == 0;
  if (!same) ++g_mismatches;
  std::printf("%-28s %10.3f ms %10.3f ms %7.2fx  %s\n", name.c_str(),
              ts * 1e3, tp * 1e3, ts / tp, same ? "bitwise equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 7;
  std::printf("%-28s %13s %13s %8s\n", "kernel", "serial", "openmp",
              "speedup");

  {
    Conv2dDims d{8, 32, 32, 32, 64, 3, 3, 1, 1};
    auto in = random_vec(size_t(d.n * d.cin * d.h * d.w), 1);
    auto w = random_vec(size_t(d.cout * d.cin * d.kh * d.kw), 2);
    auto bias = random_vec(size_t(d.cout), 3);
    size_t out_n = size_t(d.n * d.cout * d.ho() * d.wo());
    std::vector<double> o1(out_n), o2(out_n);
    row("conv2d_fwd 8x32x32x32->64",
        [&] { kernels::ref::conv2d_fwd(in.data(), w.data(), bias.data(),
                                       o1.data(), d); },
        [&] { kernels::par::conv2d_fwd(in.data(), w.data(), bias.data(),
                                       o2.data(), d); },
        o1, o2, reps);

    auto gout = random_vec(out_n, 4);
    std::vector<double> g1(in.size()), g2(in.size());
    row("conv2d_bwd_input",
        [&] {
          std::fill(g1.begin(), g1.end(), 0.0);
          kernels::ref::conv2d_bwd_input(gout.data(), w.data(), g1.data(), d);
        },
        [&] {
          std::fill(g2.begin(), g2.end(), 0.0);
          kernels::par::conv2d_bwd_input(gout.data(), w.data(), g2.data(), d);
        },
        g1, g2, reps);

    std::vector<double> gw1(w.size()), gw2(w.size());
    row("conv2d_bwd_weight",
        [&] {
          std::fill(gw1.begin(), gw1.end(), 0.0);
          kernels::ref::conv2d_bwd_weight(gout.data(), in.data(), gw1.data(),
                                          d);
        },
        [&] {
          std::fill(gw2.begin(), gw2.end(), 0.0);
          kernels::par::conv2d_bwd_weight(gout.data(), in.data(), gw2.data(),
                                          d);
        },
        gw1, gw2, reps);
  }

  {
    Conv2dDims d{8, 64, 32, 32, 64, 3, 3, 1, 1};
    auto in = random_vec(size_t(d.n * d.cin * d.h * d.w), 5);
    auto w = random_vec(size_t(d.cin * d.kh * d.kw), 6);
    size_t out_n = size_t(d.n * d.cin * d.ho() * d.wo());
    std::vector<double> o1(out_n), o2(out_n);
    row("depthwise_fwd 8x64x32x32",
        [&] { kernels::ref::depthwise_fwd(in.data(), w.data(), o1.data(), d); },
        [&] { kernels::par::depthwise_fwd(in.data(), w.data(), o2.data(), d); },
        o1, o2, reps);
  }

  {
    int64_t m = 512, n = 512, k = 512;
    auto a = random_vec(size_t(m * k), 7);
    auto b = random_vec(size_t(k * n), 8);
    std::vector<double> c1(size_t(m * n)), c2(size_t(m * n));
    row("matmul 512^3",
        [&] { kernels::ref::matmul(a.data(), b.data(), c1.data(), m, n, k,
                                   false, false, false); },
        [&] { kernels::par::matmul(a.data(), b.data(), c2.data(), m, n, k,
                                   false, false, false); },
        c1, c2, reps);
  }

  {
    PoolDims d{16, 64, 32, 32, 2, 2};
    auto in = random_vec(size_t(d.n * d.c * d.h * d.w), 9);
    size_t out_n = size_t(d.n * d.c * d.ho() * d.wo());
    std::vector<double> o1(out_n), o2(out_n);
    std::vector<int64_t> am1(out_n), am2(out_n);
    row("maxpool_fwd 16x64x32x32 k2",
        [&] { kernels::ref::maxpool_fwd(in.data(), o1.data(), am1.data(), d); },
        [&] { kernels::par::maxpool_fwd(in.data(), o2.data(), am2.data(), d); },
        o1, o2, reps);

    std::vector<double> p1(out_n), p2(out_n);
    row("avgpool_fwd 16x64x32x32 k2",
        [&] { kernels::ref::avgpool_fwd(in.data(), p1.data(), d); },
        [&] { kernels::par::avgpool_fwd(in.data(), p2.data(), d); },
        p1, p2, reps);
  }

  if (g_mismatches) {
    std::printf("%d kernel(s) disagreed between paths\n", g_mismatches);
    return 1;
  }
  return 0;
}
