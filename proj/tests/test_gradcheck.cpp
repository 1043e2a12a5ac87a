#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "icnn/checks.hpp"
#include "icnn/gradcheck.hpp"
#include "icnn/ic.hpp"
#include "icnn/rng.hpp"

using namespace icnn;

TEST_CASE("every layer kind passes the finite-difference audit") {
  CheckOptions opt;
  CheckResult r = check_gradcheck(opt);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("gated dense gradients away from the gate boundary") {
  // |H| >> eps for every batch element, so no coordinate is excluded
  Tensor x = Tensor::from_data({2, 2}, {1, 2, -1, 0.5}).set_requires_grad(true);
  ICDenseParams p;
  p.weight =
      Tensor::from_data({2, 2}, {0.5, 0.5, -0.4, 0.8}).set_requires_grad(true);
  p.w_prime = Tensor::from_data({2}, {0.25, -0.5}).set_requires_grad(true);
  p.bias_main = Tensor::from_data({2}, {0.1, -0.2}).set_requires_grad(true);
  p.bias_inner = Tensor::from_data({2}, {2.0, -2.0}).set_requires_grad(true);

  auto loss = [&]() {
    return sum(ic_dense_forward(x, p, Activation::identity));
  };
  GradCheckResult r = finite_diff_check(
      loss, {x, p.weight, p.w_prime, p.bias_main, p.bias_inner});
  CHECK(r.skipped == 0);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("gate weight gradient is zero when the gate never opens") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 0.5, 1}).set_requires_grad(true);
  ICDenseParams p;
  p.weight = Tensor::from_data({1, 2}, {0.1, 0.1}).set_requires_grad(true);
  p.w_prime = Tensor::from_data({1}, {10.0}).set_requires_grad(true);
  sum(ic_dense_forward(x, p, Activation::identity)).backward();
  CHECK(p.w_prime.grad() == std::vector<double>{0});

  // and nonzero when it opens on some element
  Tensor x2 = Tensor::from_data({2, 2}, {1, 2, 0.5, 1}).set_requires_grad(true);
  ICDenseParams q;
  q.weight = Tensor::from_data({1, 2}, {0.5, 0.5}).set_requires_grad(true);
  q.w_prime = Tensor::from_data({1}, {0.01}).set_requires_grad(true);
  sum(ic_dense_forward(x2, q, Activation::identity)).backward();
  CHECK(q.w_prime.grad()[0] != 0.0);
}

TEST_CASE("probe scale separates kinks from smooth curvature") {
  // sharp but smooth: loss = sum(p^4) has third derivatives ~ 24 p,
  // handled by the Richardson reference rather than skipped
  Tensor p = Tensor::from_data({3}, {1.5, -2.0, 0.7}).set_requires_grad(true);
  auto loss = [&]() {
    Tensor sq = mul(p, p);
    return sum(mul(sq, sq));
  };
  GradCheckResult r = finite_diff_check(loss, {p});
  CHECK(r.skipped == 0);
  CHECK(r.checked == 3);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("off-center kinks inside the probe window are excluded") {
  // kink at 4e-4 lies within eps=1e-3 but not at the center
  Tensor p = Tensor::from_data({1}, {4e-4}).set_requires_grad(true);
  auto loss = [&]() { return sum(relu(p)); };
  GradCheckResult r = finite_diff_check(loss, {p});
  CHECK(r.skipped == 1);
  CHECK(r.checked == 0);
}
