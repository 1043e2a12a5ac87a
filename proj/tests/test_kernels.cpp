#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <vector>

#include "icnn/kernels.hpp"
#include "icnn/rng.hpp"

using namespace icnn;
using kernels::Conv2dDims;
using kernels::PoolDims;

namespace {

std::vector<double> randvec(Rng& rng, int64_t n) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("matmul serial and parallel agree bitwise") {
  Rng rng(derive_seed(1, 0x3A7));
  for (int t = 0; t < 30; ++t) {
    int64_t m = 1 + int64_t(rng.below(8));
    int64_t n = 1 + int64_t(rng.below(8));
    int64_t k = 1 + int64_t(rng.below(8));
    bool ta = rng.below(2), tb = rng.below(2), acc = rng.below(2);
    auto a = randvec(rng, m * k);
    auto b = randvec(rng, k * n);
    auto c0 = randvec(rng, m * n);
    auto c1 = c0;
    kernels::ref::matmul(a.data(), b.data(), c0.data(), m, n, k, ta, tb, acc);
    kernels::par::matmul(a.data(), b.data(), c1.data(), m, n, k, ta, tb, acc);
    CHECK(c0 == c1);
  }
}

TEST_CASE("matmul transpose flags match the plain layout") {
  // a [2,3] row-major, b [3,2]; a^T stored as [3,2], b^T stored as [2,3]
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> at = {1, 4, 2, 5, 3, 6};
  std::vector<double> b = {7, 8, 9, 10, 11, 12};
  std::vector<double> bt = {7, 9, 11, 8, 10, 12};
  std::vector<double> plain(4, 0), flag_a(4, 0), flag_b(4, 0);
  kernels::ref::matmul(a.data(), b.data(), plain.data(), 2, 2, 3, false,
                       false, false);
  kernels::ref::matmul(at.data(), b.data(), flag_a.data(), 2, 2, 3, true,
                       false, false);
  kernels::ref::matmul(a.data(), bt.data(), flag_b.data(), 2, 2, 3, false,
                       true, false);
  CHECK(plain == std::vector<double>{58, 64, 139, 154});
  CHECK(flag_a == plain);
  CHECK(flag_b == plain);
}

TEST_CASE("conv2d kernels agree bitwise across variants") {
  Rng rng(derive_seed(2, 0x3A7));
  for (int t = 0; t < 20; ++t) {
    Conv2dDims d;
    d.n = 1 + int64_t(rng.below(2));
    d.cin = 1 + int64_t(rng.below(3));
    d.cout = 1 + int64_t(rng.below(4));
    d.kh = d.kw = 1 + int64_t(rng.below(3));
    d.stride = 1 + int64_t(rng.below(2));
    d.pad = int64_t(rng.below(2));
    d.h = d.kh + int64_t(rng.below(5));
    d.w = d.kw + int64_t(rng.below(5));
    auto in = randvec(rng, d.n * d.cin * d.h * d.w);
    auto w = randvec(rng, d.cout * d.cin * d.kh * d.kw);
    auto bias = randvec(rng, d.cout);
    int64_t out_n = d.n * d.cout * d.ho() * d.wo();

    std::vector<double> o0(out_n), o1(out_n);
    kernels::ref::conv2d_fwd(in.data(), w.data(), bias.data(), o0.data(), d);
    kernels::par::conv2d_fwd(in.data(), w.data(), bias.data(), o1.data(), d);
    CHECK(o0 == o1);

    auto gout = randvec(rng, out_n);
    std::vector<double> gi0(in.size(), 0), gi1(in.size(), 0);
    kernels::ref::conv2d_bwd_input(gout.data(), w.data(), gi0.data(), d);
    kernels::par::conv2d_bwd_input(gout.data(), w.data(), gi1.data(), d);
    CHECK(gi0 == gi1);

    std::vector<double> gw0(w.size(), 0), gw1(w.size(), 0);
    kernels::ref::conv2d_bwd_weight(gout.data(), in.data(), gw0.data(), d);
    kernels::par::conv2d_bwd_weight(gout.data(), in.data(), gw1.data(), d);
    CHECK(gw0 == gw1);

    std::vector<double> gb0(bias.size(), 0), gb1(bias.size(), 0);
    kernels::ref::conv2d_bwd_bias(gout.data(), gb0.data(), d);
    kernels::par::conv2d_bwd_bias(gout.data(), gb1.data(), d);
    CHECK(gb0 == gb1);
  }
}

TEST_CASE("depthwise kernels agree bitwise across variants") {
  Rng rng(derive_seed(3, 0x3A7));
  for (int t = 0; t < 20; ++t) {
    Conv2dDims d;
    d.n = 1 + int64_t(rng.below(2));
    d.cin = d.cout = 1 + int64_t(rng.below(4));
    d.kh = d.kw = 1 + int64_t(rng.below(3));
    d.stride = 1 + int64_t(rng.below(2));
    d.pad = int64_t(rng.below(2));
    d.h = d.kh + int64_t(rng.below(5));
    d.w = d.kw + int64_t(rng.below(5));
    auto in = randvec(rng, d.n * d.cin * d.h * d.w);
    auto w = randvec(rng, d.cin * d.kh * d.kw);
    int64_t out_n = d.n * d.cin * d.ho() * d.wo();

    std::vector<double> o0(out_n), o1(out_n);
    kernels::ref::depthwise_fwd(in.data(), w.data(), o0.data(), d);
    kernels::par::depthwise_fwd(in.data(), w.data(), o1.data(), d);
    CHECK(o0 == o1);

    auto gout = randvec(rng, out_n);
    std::vector<double> gi0(in.size(), 0), gi1(in.size(), 0);
    kernels::ref::depthwise_bwd_input(gout.data(), w.data(), gi0.data(), d);
    kernels::par::depthwise_bwd_input(gout.data(), w.data(), gi1.data(), d);
    CHECK(gi0 == gi1);

    std::vector<double> gw0(w.size(), 0), gw1(w.size(), 0);
    kernels::ref::depthwise_bwd_weight(gout.data(), in.data(), gw0.data(), d);
    kernels::par::depthwise_bwd_weight(gout.data(), in.data(), gw1.data(), d);
    CHECK(gw0 == gw1);
  }
}

TEST_CASE("pool kernels agree bitwise across variants") {
  Rng rng(derive_seed(4, 0x3A7));
  for (int t = 0; t < 20; ++t) {
    PoolDims d;
    d.n = 1 + int64_t(rng.below(2));
    d.c = 1 + int64_t(rng.below(4));
    d.k = 2 + int64_t(rng.below(2));
    d.stride = 1 + int64_t(rng.below(2));
    d.h = d.k + int64_t(rng.below(5));
    d.w = d.k + int64_t(rng.below(5));
    auto in = randvec(rng, d.n * d.c * d.h * d.w);
    int64_t out_n = d.n * d.c * d.ho() * d.wo();

    std::vector<double> o0(out_n), o1(out_n);
    std::vector<int64_t> am0(out_n), am1(out_n);
    kernels::ref::maxpool_fwd(in.data(), o0.data(), am0.data(), d);
    kernels::par::maxpool_fwd(in.data(), o1.data(), am1.data(), d);
    CHECK(o0 == o1);
    CHECK(am0 == am1);

    auto gout = randvec(rng, out_n);
    std::vector<double> gi0(in.size(), 0), gi1(in.size(), 0);
    kernels::ref::maxpool_bwd(gout.data(), am0.data(), gi0.data(), d);
    kernels::par::maxpool_bwd(gout.data(), am1.data(), gi1.data(), d);
    CHECK(gi0 == gi1);

    kernels::ref::avgpool_fwd(in.data(), o0.data(), d);
    kernels::par::avgpool_fwd(in.data(), o1.data(), d);
    CHECK(o0 == o1);

    std::fill(gi0.begin(), gi0.end(), 0.0);
    std::fill(gi1.begin(), gi1.end(), 0.0);
    kernels::ref::avgpool_bwd(gout.data(), gi0.data(), d);
    kernels::par::avgpool_bwd(gout.data(), gi1.data(), d);
    CHECK(gi0 == gi1);
  }
}

TEST_CASE("dispatch follows the parallel toggle") {
  bool was = kernels::parallel_enabled();
  std::vector<double> a = {1, 2, 3, 4};
  std::vector<double> b = {5, 6, 7, 8};
  std::vector<double> want = {19, 22, 43, 50};

  kernels::set_parallel(false);
  CHECK(!kernels::parallel_enabled());
  std::vector<double> c(4, 0);
  kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2, false, false, false);
  CHECK(c == want);

  kernels::set_parallel(true);
  CHECK(kernels::parallel_enabled());
  std::fill(c.begin(), c.end(), 0.0);
  kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2, false, false, false);
  CHECK(c == want);

  kernels::set_parallel(was);
}

TEST_CASE("backward kernels accumulate instead of overwriting") {
  Conv2dDims d;
  d.n = 1;
  d.cin = 1;
  d.cout = 1;
  d.kh = d.kw = 2;
  d.stride = 1;
  d.pad = 0;
  d.h = d.w = 3;
  std::vector<double> in(9, 1.0), w(4, 1.0), gout(4, 1.0);
  std::vector<double> gw(4, 10.0);
  kernels::ref::conv2d_bwd_weight(gout.data(), in.data(), gw.data(), d);
  // each weight sees four windows of ones on top of the preset 10
  CHECK(gw == std::vector<double>{14, 14, 14, 14});
}
