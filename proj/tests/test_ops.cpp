#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "icnn/ops.hpp"
#include "icnn/rng.hpp"

using namespace icnn;

namespace {

Tensor randn_t(Rng& rng, const Shape& shape, double sd = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.normal(0.0, sd);
  return Tensor::from_data(shape, std::move(v));
}

}  // namespace

TEST_CASE("conv2d window sums and identity kernels") {
  Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
  ConvParams p;
  p.weight = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor out = conv2d(ones, p);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.item() == 9.0);

  // delta kernel with padding reproduces the input
  std::vector<double> delta(9, 0.0);
  delta[4] = 1.0;
  ConvParams id;
  id.weight = Tensor::from_data({1, 1, 3, 3}, delta);
  id.padding = 1;
  Tensor x = Tensor::from_data({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(conv2d(x, id).values() == x.values());
}

TEST_CASE("conv2d hand-counted window") {
  std::vector<double> v(9);
  std::iota(v.begin(), v.end(), 1.0);  // 1..9
  Tensor x = Tensor::from_data({1, 1, 3, 3}, v);
  ConvParams p;
  p.weight = Tensor::full({1, 1, 3, 3}, 0.1);
  CHECK(conv2d(x, p).item() == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("conv2d bias stride and errors") {
  Tensor x = Tensor::full({1, 2, 4, 4}, 1.0);
  ConvParams p;
  p.weight = Tensor::full({3, 2, 2, 2}, 1.0);
  p.bias = Tensor::from_data({3}, {0.5, -0.5, 0});
  p.stride = 2;
  Tensor out = conv2d(x, p);
  CHECK(out.shape() == Shape{1, 3, 2, 2});
  CHECK(out.at({0, 0, 0, 0}) == 8.5);
  CHECK(out.at({0, 1, 1, 1}) == 7.5);

  ConvParams bad;
  bad.weight = Tensor::full({1, 3, 2, 2}, 1.0);  // channel mismatch
  CHECK_THROWS_AS(conv2d(x, bad), ShapeError);

  ConvParams wide;
  wide.weight = Tensor::full({1, 2, 5, 5}, 1.0);  // window wider than input
  CHECK_THROWS_AS(conv2d(x, wide), ShapeError);
}

TEST_CASE("depthwise conv per-channel independence") {
  Tensor ones = Tensor::full({1, 2, 3, 3}, 1.0);
  Tensor w = Tensor::full({2, 3, 3}, 1.0);
  Tensor out = depthwise_conv2d(ones, w, 1, 0);
  CHECK(out.shape() == Shape{1, 2, 1, 1});
  CHECK(out.at({0, 0, 0, 0}) == 9.0);
  CHECK(out.at({0, 1, 0, 0}) == 9.0);

  // channel 0 zero kernel, channel 1 ones
  std::vector<double> mixed(18, 0.0);
  for (int i = 9; i < 18; ++i) mixed[i] = 1.0;
  Tensor x = Tensor::full({1, 2, 4, 4}, 1.0);
  Tensor out2 = depthwise_conv2d(x, Tensor::from_data({2, 3, 3}, mixed), 1, 0);
  CHECK(out2.shape() == Shape{1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    CHECK(out2.values()[size_t(i)] == 0.0);
    CHECK(out2.values()[size_t(4 + i)] == 9.0);
  }

  // delta kernels reproduce the input
  std::vector<double> delta(18, 0.0);
  delta[4] = delta[13] = 1.0;
  Tensor xr = Tensor::from_data({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(depthwise_conv2d(xr, Tensor::from_data({2, 3, 3}, delta), 1, 1)
            .values() == xr.values());

  CHECK_THROWS_AS(depthwise_conv2d(ones, Tensor::full({3, 3, 3}, 1.0), 1, 0),
                  ShapeError);
}

TEST_CASE("depthwise equals conv2d with block-diagonal weights") {
  Rng rng(derive_seed(0, 0xB10C));
  for (int t = 0; t < 10; ++t) {
    int64_t c = 1 + int64_t(rng.below(3));
    int64_t k = 2 + int64_t(rng.below(2));
    int64_t hw = k + 2 + int64_t(rng.below(3));
    Tensor x = randn_t(rng, {2, c, hw, hw});
    Tensor dw = randn_t(rng, {c, k, k});

    std::vector<double> blockdiag(static_cast<size_t>(c * c * k * k), 0.0);
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < k * k; ++j)
        blockdiag[size_t((i * c + i) * k * k + j)] =
            dw.values()[size_t(i * k * k + j)];
    ConvParams p;
    p.weight = Tensor::from_data({c, c, k, k}, blockdiag);
    p.padding = 1;

    Tensor a = depthwise_conv2d(x, dw, 1, 1);
    Tensor b = conv2d(x, p);
    REQUIRE(a.numel() == b.numel());
    for (int64_t i = 0; i < a.numel(); ++i)
      CHECK(std::fabs(a.values()[size_t(i)] - b.values()[size_t(i)]) <
            1e-12);
  }
}

TEST_CASE("batch norm train mode normalizes per channel") {
  Rng rng(derive_seed(0, 0xB4));
  Tensor x = randn_t(rng, {4, 2, 3, 3}, 2.5);
  BatchNormState bn = BatchNormState::make(2);
  Tensor out = batch_norm(x, bn);

  const int64_t n = 4, c = 2, hw = 9;
  for (int64_t j = 0; j < c; ++j) {
    double s = 0.0, s2 = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t k = 0; k < hw; ++k) {
        double v = out.values()[size_t((i * c + j) * hw + k)];
        s += v;
        s2 += v * v;
      }
    double m = s / double(n * hw);
    double var = s2 / double(n * hw) - m * m;
    CHECK(std::fabs(m) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps term absorbs a bit
  }
}

TEST_CASE("batch norm affine on a constant input") {
  Tensor x = Tensor::full({2, 1, 2, 2}, 7.0);
  BatchNormState bn = BatchNormState::make(1);
  bn.gamma = Tensor::full({1}, 2.0);
  bn.beta = Tensor::full({1}, 3.0);
  Tensor out = batch_norm(x, bn);
  for (double v : out.values())
    CHECK(v == doctest::Approx(3.0).epsilon(1e-9));  // variance eps-dominated
}

TEST_CASE("batch norm eval mode is a fixed affine map") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  BatchNormState bn = BatchNormState::make(1);
  bn.training = false;  // running stats start at mean 0, var 1
  Tensor out = batch_norm(x, bn);
  double scale = 1.0 / std::sqrt(1.0 + bn.eps);
  for (int i = 0; i < 4; ++i)
    CHECK(out.values()[size_t(i)] ==
          doctest::Approx(x.values()[size_t(i)] * scale).epsilon(1e-12));
}

TEST_CASE("batch norm updates running statistics in train mode") {
  Tensor x = Tensor::from_data({1, 1, 1, 4}, {1, 2, 3, 4});  // mean 2.5
  BatchNormState bn = BatchNormState::make(1);
  batch_norm(x, bn);
  CHECK(bn.running_mean.values()[0] == doctest::Approx(0.25));  // 0.1 * 2.5
  CHECK(bn.running_var.values()[0] ==
        doctest::Approx(0.9 * 1.0 + 0.1 * 1.25));  // biased var 1.25
}

TEST_CASE("batch norm rejects single-element statistics") {
  Tensor x = Tensor::full({1, 3, 1, 1}, 1.0);
  BatchNormState bn = BatchNormState::make(3);
  CHECK_THROWS_AS(batch_norm(x, bn), ValueError);
  bn.training = false;
  CHECK_NOTHROW(batch_norm(x, bn));  // eval mode has no such constraint
}

TEST_CASE("pooling") {
  Tensor c = Tensor::full({1, 1, 4, 4}, 2.5);
  Tensor avg = pool(c, PoolKind::avg, 2, 2);
  CHECK(avg.shape() == Shape{1, 1, 2, 2});
  for (double v : avg.values()) CHECK(v == 2.5);

  Tensor m = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(pool(m, PoolKind::max, 2, 2).item() == 4.0);

  Tensor g = Tensor::from_data({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor ga = global_avg_pool(g);
  CHECK(ga.shape() == Shape{1, 2, 1, 1});
  CHECK(ga.values() == std::vector<double>{2.5, 25});

  CHECK_THROWS_AS(pool(m, PoolKind::max, 3, 1), ShapeError);
}

TEST_CASE("max pool ties route gradient to the first element in scan order") {
  Tensor x = Tensor::full({1, 1, 2, 2}, 5.0).set_requires_grad(true);
  sum(pool(x, PoolKind::max, 2, 2)).backward();
  CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("dense affine map") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  CHECK(dense(x, eye, Tensor()).values() == x.values());

  Tensor w = Tensor::from_data({1, 2}, {1, 1});
  Tensor b = Tensor::from_data({1}, {1});
  CHECK(dense(Tensor::from_data({1, 2}, {2, 3}), w, b).item() == 6.0);

  Tensor w3 = Tensor::from_data({1, 3}, {1, 1, 1});
  CHECK_THROWS_AS(dense(x, w3, Tensor()), ShapeError);
}

TEST_CASE("softmax cross entropy values") {
  Tensor uniform = Tensor::zeros({3, 10});
  CHECK(softmax_cross_entropy(uniform, {0, 5, 9}).item() ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));

  std::vector<double> hot(10, 0.0);
  hot[4] = 30.0;
  CHECK(softmax_cross_entropy(Tensor::from_data({1, 10}, hot), {4}).item() <
        1e-10);

  Tensor two = Tensor::from_data({1, 2}, {0.0, std::log(3.0)});
  CHECK(softmax_cross_entropy(two, {1}).item() ==
        doctest::Approx(-std::log(3.0 / 4.0)).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_cross_entropy(two, {2}), ValueError);
  CHECK_THROWS_AS(softmax_cross_entropy(two, {-1}), ValueError);
}

TEST_CASE("softmax cross entropy gradient is softmax minus one-hot") {
  Tensor logits =
      Tensor::from_data({2, 3}, {0.2, -0.1, 0.5, 1.0, 0.0, -1.0})
          .set_requires_grad(true);
  softmax_cross_entropy(logits, {2, 0}).backward();
  const auto& g = logits.grad();
  for (int64_t r = 0; r < 2; ++r) {
    double m = -1e300, z = 0.0;
    for (int64_t k = 0; k < 3; ++k)
      m = std::max(m, logits.values()[size_t(r * 3 + k)]);
    std::vector<double> p(3);
    for (int64_t k = 0; k < 3; ++k) {
      p[size_t(k)] = std::exp(logits.values()[size_t(r * 3 + k)] - m);
      z += p[size_t(k)];
    }
    int label = r == 0 ? 2 : 0;
    for (int64_t k = 0; k < 3; ++k) {
      double want = (p[size_t(k)] / z - (k == label ? 1.0 : 0.0)) / 2.0;
      CHECK(g[size_t(r * 3 + k)] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("argmax rows") {
  Tensor t = Tensor::from_data({2, 3}, {1, 5, 2, 9, 0, 3});
  CHECK(argmax_rows(t) == std::vector<int>{1, 0});
}
