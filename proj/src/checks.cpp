#include "icnn/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "icnn/collision.hpp"
#include "icnn/error.hpp"
#include "icnn/gradcheck.hpp"
#include "icnn/ic.hpp"
#include "icnn/kernels.hpp"
#include "icnn/rng.hpp"

namespace icnn {
namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

Tensor randn(Rng& rng, const Shape& shape, double sd = 1.0) {
  std::vector<double> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = sd * rng.normal();
  return Tensor::from_data(shape, std::move(v));
}

Tensor randu(Rng& rng, const Shape& shape, double lo, double hi) {
  std::vector<double> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(shape, std::move(v));
}

CheckResult timed(const std::string& name,
                  const std::function<std::pair<bool, std::string>()>& body) {
  CheckResult r;
  r.name = name;
  auto t0 = Clock::now();
  try {
    auto [pass, detail] = body();
    r.pass = pass;
    r.detail = detail;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

}  // namespace

CheckResult check_equivalence(const CheckOptions& opt) {
  return timed("equivalence", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 10000;
    int64_t n = opt.dim > 0 ? opt.dim : 8;
    int64_t m = 4;
    double worst = 0.0;
    for (int64_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(opt.seed, 0xE9, uint64_t(t)));
      ICDenseParams p;
      p.weight = randn(rng, {m, n});
      p.w_prime = randn(rng, {m});
      p.bias_main = randn(rng, {m});
      p.bias_inner = randn(rng, {m});
      Tensor x = randn(rng, {1, n});
      Activation f = (t % 2 == 0) ? Activation::relu : Activation::identity;
      Tensor a = ic_dense_forward(x, p, f);
      Tensor b = ic_dense_piecewise(x, p, f);
      for (int64_t j = 0; j < m; ++j)
        worst = std::max(worst,
                         std::fabs(a.values()[size_t(j)] -
                                   b.values()[size_t(j)]));
    }
    bool pass = worst < 1e-12;
    return {pass, fmt("max abs diff %.3g over %.0f trials (bound 1e-12)",
                      worst, double(trials))};
  });
}

CheckResult check_reduction(const CheckOptions& opt) {
  return timed("reduction", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 100;
    int64_t collapse_ok = 0, doubling_ok = 0;
    for (int64_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(opt.seed, 0x2ED, uint64_t(t)));
      int64_t k = 2 + int64_t(rng.below(2));          // 2 or 3
      int64_t cin = 1 + int64_t(rng.below(4));
      int64_t cout = 1 + int64_t(rng.below(4));
      int64_t hw = 4 + int64_t(rng.below(5));
      int64_t stride = 1 + int64_t(rng.below(2));
      int64_t pad = int64_t(rng.below(uint64_t(k)));  // <= k-1
      bool grouped = t % 2 == 0;

      // collapse: tiny positive-input conv against a large positive
      // contraction keeps the gate argument strictly negative
      {
        ICConvParams p;
        p.conv.weight = randu(rng, {cout, cin, k, k}, -0.1, 0.1);
        p.conv.stride = stride;
        p.conv.padding = pad;
        p.mode = grouped ? ICConvMode::grouped : ICConvMode::scalar;
        p.w_prime = grouped ? Tensor::full({cout, cin}, 5.0)
                            : Tensor::full({cout}, 5.0);
        Tensor x = randu(rng, {2, cin, hw, hw}, 0.5, 1.5);
        Tensor plain = conv2d(x, p.conv);
        Tensor out = ic_conv_forward(x, p);
        if (out.values() == plain.values()) ++collapse_ok;
      }
      // doubling: w'=0 and nonnegative main, so the gate passes main through
      {
        ICConvParams p;
        p.conv.weight = randu(rng, {cout, cin, k, k}, 0.0, 0.2);
        p.conv.stride = stride;
        p.conv.padding = pad;
        p.mode = grouped ? ICConvMode::grouped : ICConvMode::scalar;
        p.w_prime = grouped ? Tensor::zeros({cout, cin})
                            : Tensor::zeros({cout});
        Tensor x = randu(rng, {2, cin, hw, hw}, 0.0, 1.5);
        Tensor plain = conv2d(x, p.conv);
        Tensor out = ic_conv_forward(x, p);
        bool ok = out.numel() == plain.numel();
        for (int64_t i = 0; ok && i < out.numel(); ++i)
          ok = out.values()[size_t(i)] == 2.0 * plain.values()[size_t(i)];
        if (ok) ++doubling_ok;
      }
    }
    bool pass = collapse_ok == trials && doubling_ok == trials;
    return {pass, fmt("collapse %.0f/%.0f bitwise, ", double(collapse_ok),
                      double(trials)) +
                      fmt("doubling %.0f/%.0f bitwise", double(doubling_ok),
                          double(trials))};
  });
}

namespace {

struct GcCase {
  std::string name;
  GradCheckResult result;
};

// Scalarizes a tensor-valued forward with fixed random coefficients so every
// output element influences the loss.
std::function<Tensor()> weighted_loss(const std::function<Tensor()>& fwd,
                                      uint64_t seed) {
  Shape shape;
  {
    NoGrad ng;
    shape = fwd().shape();
  }
  Rng rng(derive_seed(seed, 0xC0EF));
  Tensor c = randn(rng, shape);
  return [fwd, c]() { return sum(mul(fwd(), c)); };
}

GcCase gc_run(const std::string& name, const std::function<Tensor()>& fwd,
              const std::vector<Tensor>& params, uint64_t seed,
              bool scalarize = true) {
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  auto loss = scalarize ? weighted_loss(fwd, seed) : fwd;
  return {name, finite_diff_check(loss, params)};
}

}  // namespace

CheckResult check_gradcheck(const CheckOptions& opt) {
  return timed("gradcheck", [&]() -> std::pair<bool, std::string> {
    uint64_t seed = opt.seed;
    std::vector<GcCase> cases;

    {
      Rng rng(derive_seed(seed, 1));
      Tensor x = randn(rng, {2, 3, 6, 6}, 0.5).set_requires_grad(true);
      ConvParams p;
      p.weight = randn(rng, {4, 3, 3, 3}, 0.5).set_requires_grad(true);
      p.bias = randn(rng, {4}, 0.5).set_requires_grad(true);
      p.stride = 2;
      p.padding = 1;
      cases.push_back(gc_run("conv", [&]() { return conv2d(x, p); },
                             {x, p.weight, p.bias}, seed));
    }
    {
      Rng rng(derive_seed(seed, 2));
      Tensor x = randn(rng, {2, 3, 6, 6}, 0.5).set_requires_grad(true);
      Tensor w = randn(rng, {3, 2, 2}, 0.5).set_requires_grad(true);
      cases.push_back(
          gc_run("depthwise", [&]() { return depthwise_conv2d(x, w, 1, 1); },
                 {x, w}, seed));
    }
    {
      Rng rng(derive_seed(seed, 3));
      Tensor x = randn(rng, {4, 2, 3, 3}, 0.8).set_requires_grad(true);
      BatchNormState bn = BatchNormState::make(2);
      bn.gamma = randn(rng, {2}, 0.5).set_requires_grad(true);
      bn.beta = randn(rng, {2}, 0.5).set_requires_grad(true);
      cases.push_back(gc_run("batch_norm", [&]() { return batch_norm(x, bn); },
                             {x, bn.gamma, bn.beta}, seed));
    }
    {
      Rng rng(derive_seed(seed, 4));
      Tensor x = randn(rng, {5, 7}, 0.5).set_requires_grad(true);
      Tensor w = randn(rng, {4, 7}, 0.5).set_requires_grad(true);
      Tensor b = randn(rng, {4}, 0.5).set_requires_grad(true);
      cases.push_back(gc_run("dense", [&]() { return dense(x, w, b); },
                             {x, w, b}, seed));
    }
    for (auto f : {Activation::relu, Activation::identity}) {
      Rng rng(derive_seed(seed, f == Activation::relu ? 5 : 6));
      Tensor x = randn(rng, {4, 6}, 0.5).set_requires_grad(true);
      ICDenseParams p;
      p.weight = randn(rng, {3, 6}, 0.5).set_requires_grad(true);
      p.w_prime = randn(rng, {3}, 0.5).set_requires_grad(true);
      p.bias_main = randn(rng, {3}, 0.5).set_requires_grad(true);
      p.bias_inner = randn(rng, {3}, 0.5).set_requires_grad(true);
      cases.push_back(gc_run(
          f == Activation::relu ? "ic_dense_relu" : "ic_dense_identity",
          [&]() { return ic_dense_forward(x, p, f); },
          {x, p.weight, p.w_prime, p.bias_main, p.bias_inner}, seed));
    }
    for (auto mode : {ICConvMode::grouped, ICConvMode::scalar}) {
      Rng rng(derive_seed(seed, mode == ICConvMode::grouped ? 7 : 8));
      Tensor x = randn(rng, {2, 3, 5, 5}, 0.5).set_requires_grad(true);
      ICConvParams p;
      p.conv.weight = randn(rng, {4, 3, 3, 3}, 0.4).set_requires_grad(true);
      p.conv.stride = 1;
      p.conv.padding = 1;
      p.mode = mode;
      p.w_prime = (mode == ICConvMode::grouped ? randn(rng, {4, 3}, 0.4)
                                               : randn(rng, {4}, 0.4))
                      .set_requires_grad(true);
      cases.push_back(gc_run(
          mode == ICConvMode::grouped ? "ic_conv_grouped" : "ic_conv_scalar",
          [&]() { return ic_conv_forward(x, p); },
          {x, p.conv.weight, p.w_prime}, seed));
    }
    for (auto kind : {PoolKind::max, PoolKind::avg}) {
      Rng rng(derive_seed(seed, kind == PoolKind::max ? 9 : 10));
      Tensor x = randn(rng, {2, 3, 6, 6}, 0.7).set_requires_grad(true);
      cases.push_back(
          gc_run(kind == PoolKind::max ? "maxpool" : "avgpool",
                 [&]() { return pool(x, kind, 2, 2); }, {x}, seed));
    }
    {
      Rng rng(derive_seed(seed, 11));
      // Small spatial extent keeps the kink-exclusion rate low: every
      // parameter reaches all downstream relu sites, and each site within
      // eps of a kink costs a coordinate.
      Tensor x = randn(rng, {1, 4, 6, 6}, 0.5).set_requires_grad(true);
      ICBlockParams p;
      p.stride = 2;
      p.conv1.weight = randn(rng, {6, 4, 3, 3}, 0.3).set_requires_grad(true);
      p.conv1.stride = 2;
      p.conv1.padding = 1;
      p.bn1 = BatchNormState::make(6);
      p.bn1.gamma.set_requires_grad(true);
      p.bn1.beta.set_requires_grad(true);
      p.conv2.weight = randn(rng, {6, 6, 3, 3}, 0.3).set_requires_grad(true);
      p.conv2.stride = 1;
      p.conv2.padding = 1;
      p.bn2 = BatchNormState::make(6);
      p.bn2.gamma.set_requires_grad(true);
      p.bn2.beta.set_requires_grad(true);
      ConvParams sc;
      sc.weight = randn(rng, {6, 4, 1, 1}, 0.5).set_requires_grad(true);
      sc.bias = randn(rng, {6}, 0.3).set_requires_grad(true);
      sc.stride = 2;
      p.shortcut = sc;
      p.combine_bn = BatchNormState::make(6);
      p.combine_bn->gamma.set_requires_grad(true);
      p.combine_bn->beta.set_requires_grad(true);
      p.wp1 = randn(rng, {6, 4}, 0.3).set_requires_grad(true);
      p.wp2 = randn(rng, {6, 6}, 0.3).set_requires_grad(true);
      cases.push_back(gc_run(
          "ic_basic_block", [&]() { return ic_basic_block(x, p); },
          {x, p.conv1.weight, p.bn1.gamma, p.bn1.beta, p.conv2.weight,
           p.bn2.gamma, p.bn2.beta, p.shortcut->weight, p.shortcut->bias,
           p.combine_bn->gamma, p.combine_bn->beta, p.wp1, p.wp2},
          seed));
    }
    {
      Rng rng(derive_seed(seed, 12));
      Tensor x = randn(rng, {2, 4, 6, 6}, 0.5).set_requires_grad(true);
      ICBlockParams p;
      p.stride = 2;
      p.conv1.weight = randn(rng, {3, 4, 1, 1}, 0.4).set_requires_grad(true);
      p.bn1 = BatchNormState::make(3);
      p.bn1.gamma.set_requires_grad(true);
      p.bn1.beta.set_requires_grad(true);
      p.conv2.weight = randn(rng, {3, 3, 3, 3}, 0.3).set_requires_grad(true);
      p.conv2.stride = 2;
      p.conv2.padding = 1;
      p.bn2 = BatchNormState::make(3);
      p.bn2.gamma.set_requires_grad(true);
      p.bn2.beta.set_requires_grad(true);
      ConvParams c3;
      c3.weight = randn(rng, {12, 3, 1, 1}, 0.4).set_requires_grad(true);
      p.conv3 = c3;
      p.bn3 = BatchNormState::make(12);
      p.bn3->gamma.set_requires_grad(true);
      p.bn3->beta.set_requires_grad(true);
      ConvParams sc;
      sc.weight = randn(rng, {12, 4, 1, 1}, 0.4).set_requires_grad(true);
      sc.bias = randn(rng, {12}, 0.3).set_requires_grad(true);
      sc.stride = 2;
      p.shortcut = sc;
      p.combine_bn = BatchNormState::make(12);
      p.combine_bn->gamma.set_requires_grad(true);
      p.combine_bn->beta.set_requires_grad(true);
      p.wp2 = randn(rng, {3, 3}, 0.3).set_requires_grad(true);
      cases.push_back(gc_run(
          "ic_bottleneck_block", [&]() { return ic_bottleneck_block(x, p); },
          {x, p.conv1.weight, p.bn1.gamma, p.bn1.beta, p.conv2.weight,
           p.bn2.gamma, p.bn2.beta, p.conv3->weight, p.bn3->gamma,
           p.bn3->beta, p.shortcut->weight, p.shortcut->bias,
           p.combine_bn->gamma, p.combine_bn->beta, p.wp2},
          seed));
    }
    {
      Rng rng(derive_seed(seed, 13));
      Tensor logits = randn(rng, {5, 7}, 1.0).set_requires_grad(true);
      std::vector<int> labels = {0, 3, 6, 2, 2};
      cases.push_back(gc_run(
          "softmax_cross_entropy",
          [&]() { return softmax_cross_entropy(logits, labels); }, {logits},
          seed, false));
    }

    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
      double frac_skipped =
          double(c.result.skipped) /
          double(std::max<int64_t>(1, c.result.checked + c.result.skipped));
      bool ok = c.result.checked > 0 && c.result.max_rel_err < 1e-4 &&
                frac_skipped <= 0.2;
      if (!ok) {
        pass = false;
        detail += c.name + fmt(": rel %.3g skipped %.0f%% FAIL; ",
                               c.result.max_rel_err, 100.0 * frac_skipped);
      }
    }
    if (pass) {
      double worst = 0.0;
      for (const auto& c : cases) worst = std::max(worst, c.result.max_rel_err);
      detail = fmt("%.0f layer kinds, worst rel err %.3g (bound 1e-4)",
                   double(cases.size()), worst);
    }
    return {pass, detail};
  });
}

namespace {

// One-layer spec pair at (k, cin, cout) and the measured deltas.
struct OverheadPoint {
  int64_t added_params = 0;
  int64_t base_params = 0;
  double mac_overhead = 0.0;
  double predicted = 0.0;
  bool pass = false;
};

OverheadPoint overhead_point(int64_t k, int64_t cin, int64_t cout) {
  ModelSpec a;
  a.name = "base";
  a.input = {cin, 16, 16};
  LayerSpec conv;
  conv.kind = "conv";
  conv.out_channels = cout;
  conv.kernel = k;
  conv.stride = 1;
  conv.padding = k / 2;
  a.layers = {conv};
  ModelSpec b = a;
  b.layers[0].kind = "ic_conv";

  Network na = build_model(a, 1);
  Network nb = build_model(b, 1);
  OverheadPoint pt;
  pt.base_params = count_params(na).total_params;
  pt.added_params = count_params(nb).total_params - pt.base_params;
  int64_t ma = count_costs(na, a.input).total_macs;
  int64_t mb = count_costs(nb, b.input).total_macs;
  pt.mac_overhead = double(mb - ma) / double(ma);
  pt.predicted = 1.0 / double(cout) + 1.0 / double(k * k);
  pt.pass = pt.added_params == cin * cout &&
            std::fabs(pt.mac_overhead - pt.predicted) <= 0.15 * pt.predicted;
  return pt;
}

}  // namespace

CheckResult check_overhead(const CheckOptions& opt) {
  return timed("overhead", [&]() -> std::pair<bool, std::string> {
    OverheadPoint pt = overhead_point(opt.k, opt.cin, opt.cout);
    std::string detail =
        "added params " + std::to_string(pt.added_params) + " (want " +
        std::to_string(opt.cin * opt.cout) + ", ratio 1/" +
        std::to_string(opt.k * opt.k) + " of base " +
        std::to_string(pt.base_params) + "); " +
        fmt("mac overhead %.4f vs predicted %.4f", pt.mac_overhead,
            pt.predicted);
    return {pt.pass, detail};
  });
}

CheckResult check_overhead_grid(const CheckOptions& opt) {
  (void)opt;
  return timed("overhead_grid", [&]() -> std::pair<bool, std::string> {
    bool pass = true;
    std::string detail;
    int points = 0;
    for (int64_t k : {int64_t(3), int64_t(5)})
      for (int64_t cin : {int64_t(16), int64_t(64)})
        for (int64_t cout : {int64_t(16), int64_t(128)}) {
          OverheadPoint pt = overhead_point(k, cin, cout);
          ++points;
          if (!pt.pass) {
            pass = false;
            detail += fmt("k=%.0f cin=%.0f cout=%.0f: ", double(k),
                          double(cin), double(cout)) +
                      std::to_string(pt.added_params) + " added, " +
                      fmt("overhead %.4f vs %.4f FAIL; ", pt.mac_overhead,
                          pt.predicted);
          }
        }
    if (pass)
      detail = std::to_string(points) +
               " grid points: exact param deltas, mac overhead within 15%";
    return {pass, detail};
  });
}

CheckResult check_angle_sweep(const CheckOptions& opt) {
  return timed("angle_sweep", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 100;
    std::vector<int64_t> dims = opt.dim > 0
                                    ? std::vector<int64_t>{opt.dim}
                                    : std::vector<int64_t>{2, 8, 64};
    int64_t sweeps = 0;
    for (int64_t dim : dims) {
      for (int64_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(opt.seed, 0x731 ^ uint64_t(dim), uint64_t(t)));
        std::vector<double> w(static_cast<size_t>(dim));
        for (auto& v : w) v = rng.normal();
        angle_sweep(w, default_sweep_grid());  // throws on violation
        ++sweeps;
      }
    }
    return {true, std::to_string(sweeps) +
                      " sweeps: strict decrease, bounds, zero crossing"};
  });
}

CheckResult check_collision(const CheckOptions& opt) {
  return timed("collision", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 10000;
    double worst = 0.0;
    for (int64_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(opt.seed, 0xC0 ^ uint64_t(t)));
      CollisionInput in;
      in.m1 = rng.uniform(0.05, 20.0);
      in.m2 = rng.uniform(0.05, 20.0);
      in.v1 = rng.uniform(-15.0, 15.0);
      CollisionResult r = collision_velocities(in);

      double p0 = in.m1 * in.v1;
      double p1 = in.m1 * r.v1_after + in.m2 * r.v2_after;
      double e0 = in.m1 * in.v1 * in.v1;
      double e1 = in.m1 * r.v1_after * r.v1_after +
                  in.m2 * r.v2_after * r.v2_after;
      worst = std::max(worst, std::fabs(p1 - p0) / std::max(1.0, std::fabs(p0)));
      worst = std::max(worst, std::fabs(e1 - e0) / std::max(1.0, std::fabs(e0)));

      if (in.v1 > 0.0) {
        double w = 2.0 * in.m1 / (in.m1 + in.m2);
        TransmitResult tr = collision_transmit(w, in.v1);
        worst = std::max(worst, std::fabs(tr.passed - r.v2_after) /
                                    std::max(1.0, std::fabs(r.v2_after)));
        double kept_want = std::max(0.0, r.v1_after);
        worst = std::max(worst, std::fabs(tr.kept - kept_want) /
                                    std::max(1.0, kept_want));
        double total_want = tr.kept + tr.passed;
        worst = std::max(worst, std::fabs(tr.total - total_want));
      }
    }
    bool pass = worst < 1e-10;
    return {pass, fmt("worst relative drift %.3g over %.0f trials "
                      "(bound 1e-10)",
                      worst, double(trials))};
  });
}

ModelSpec random_model_spec(uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5BEC));
  ModelSpec s;
  s.name = "random-" + std::to_string(seed);
  int64_t c = 1 + int64_t(rng.below(4));
  int64_t hw = 9 + int64_t(rng.below(8));
  s.input = {c, hw, hw};
  int64_t h = hw;

  auto conv_out = [](int64_t in, int64_t k, int64_t s_, int64_t p) {
    return (in + 2 * p - k) / s_ + 1;
  };

  int64_t steps = 2 + int64_t(rng.below(3));
  for (int64_t i = 0; i < steps; ++i) {
    uint64_t pick = rng.below(10);
    if (pick < 4) {
      LayerSpec l;
      l.kind = "conv";
      l.out_channels = 2 + int64_t(rng.below(7));
      const int64_t ks[4] = {1, 2, 3, 5};
      l.kernel = ks[rng.below(4)];
      l.stride = (h >= 6 && rng.below(3) == 0) ? 2 : 1;
      l.padding = l.kernel / 2;
      l.bias = rng.below(2) == 0;
      s.layers.push_back(l);
      h = conv_out(h, l.kernel, l.stride, l.padding);
      LayerSpec act;
      if (rng.below(2) == 0) {
        act.kind = "bn";
        s.layers.push_back(act);
      }
      act.kind = "relu";
      s.layers.push_back(act);
    } else if (pick < 6) {
      LayerSpec l;
      l.kind = "basic_block";
      l.out_channels = 2 + int64_t(rng.below(7));
      l.stride = (h >= 6 && rng.below(2) == 0) ? 2 : 1;
      s.layers.push_back(l);
      h = conv_out(h, 3, l.stride, 1);
    } else if (pick < 8) {
      LayerSpec l;
      l.kind = "bottleneck_block";
      l.out_channels = 1 + int64_t(rng.below(3));
      l.stride = (h >= 6 && rng.below(2) == 0) ? 2 : 1;
      s.layers.push_back(l);
      h = conv_out(h, 3, l.stride, 1);
    } else if (h >= 4) {
      LayerSpec l;
      l.kind = "pool";
      l.op = rng.below(2) == 0 ? "max" : "avg";
      l.kernel = 2;
      l.stride = 2;
      s.layers.push_back(l);
      h = (h - 2) / 2 + 1;
    }
  }
  LayerSpec flat;
  flat.kind = "flatten";
  s.layers.push_back(flat);
  LayerSpec d;
  d.kind = "dense";
  d.width = 10;
  d.bias = true;
  s.layers.push_back(d);
  return s;
}

CheckResult check_shapes(const CheckOptions& opt) {
  return timed("shapes", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 50;
    for (int64_t t = 0; t < trials; ++t) {
      ModelSpec base = random_model_spec(derive_seed(opt.seed, 0x54A, uint64_t(t)));
      PairedVariants pv = paired_variants(base);
      Network a = build_model(pv.baseline, 3);
      Network b = build_model(pv.ic_layer, 3);
      Network c = build_model(pv.ic_block, 3);
      auto sa = a.layer_shapes();
      auto sb = b.layer_shapes();
      auto sc = c.layer_shapes();
      if (sa.size() != sb.size() || sa.size() != sc.size())
        throw PropertyViolation("variant layer counts diverge on spec " +
                                base.name);
      for (size_t i = 0; i < sa.size(); ++i) {
        if (sa[i] != sb[i] || sa[i] != sc[i])
          throw PropertyViolation(
              "shape mismatch at layer " + std::to_string(i) + " of " +
              base.name + ": " + shape_str(sa[i]) + " vs " +
              shape_str(sb[i]) + " vs " + shape_str(sc[i]));
      }
    }
    return {true, std::to_string(trials) +
                      " random specs: all three variants match layer by "
                      "layer"};
  });
}

CheckResult check_kernels(const CheckOptions& opt) {
  return timed("kernels", [&]() -> std::pair<bool, std::string> {
    int64_t trials = opt.trials > 0 ? opt.trials : 20;
    for (int64_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(opt.seed, 0x4E2, uint64_t(t)));
      {
        int64_t m = 1 + int64_t(rng.below(20)), n = 1 + int64_t(rng.below(20)),
                kk = 1 + int64_t(rng.below(20));
        std::vector<double> a(size_t(m * kk)), b(size_t(kk * n)),
            c1(size_t(m * n)), c2(size_t(m * n));
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        kernels::ref::matmul(a.data(), b.data(), c1.data(), m, n, kk, false,
                             false, false);
        kernels::par::matmul(a.data(), b.data(), c2.data(), m, n, kk, false,
                             false, false);
        if (c1 != c2) throw PropertyViolation("matmul paths diverge");
      }
      {
        kernels::Conv2dDims d;
        d.n = 1 + int64_t(rng.below(3));
        d.cin = 1 + int64_t(rng.below(4));
        d.cout = 1 + int64_t(rng.below(4));
        d.h = 5 + int64_t(rng.below(6));
        d.w = 5 + int64_t(rng.below(6));
        d.kh = d.kw = 2 + int64_t(rng.below(2));
        d.stride = 1 + int64_t(rng.below(2));
        d.pad = int64_t(rng.below(2));
        std::vector<double> x(size_t(d.n * d.cin * d.h * d.w)),
            w(size_t(d.cout * d.cin * d.kh * d.kw)), bias(size_t(d.cout));
        for (auto& v : x) v = rng.normal();
        for (auto& v : w) v = rng.normal();
        for (auto& v : bias) v = rng.normal();
        std::vector<double> o1(size_t(d.n * d.cout * d.ho() * d.wo()));
        std::vector<double> o2(o1.size());
        kernels::ref::conv2d_fwd(x.data(), w.data(), bias.data(), o1.data(),
                                 d);
        kernels::par::conv2d_fwd(x.data(), w.data(), bias.data(), o2.data(),
                                 d);
        if (o1 != o2) throw PropertyViolation("conv2d paths diverge");
      }
    }
    return {true, std::to_string(trials) +
                      " random workloads: serial == parallel bitwise"};
  });
}

std::vector<CheckResult> all_checks(const CheckOptions& opt) {
  return {check_equivalence(opt), check_reduction(opt),  check_gradcheck(opt),
          check_overhead(opt),    check_overhead_grid(opt),
          check_angle_sweep(opt),   check_collision(opt),  check_shapes(opt),
          check_kernels(opt)};
}

CheckResult run_named_check(const std::string& name,
                            const CheckOptions& opt) {
  if (name == "equivalence") return check_equivalence(opt);
  if (name == "reduction") return check_reduction(opt);
  if (name == "gradcheck") return check_gradcheck(opt);
  if (name == "overhead") return check_overhead(opt);
  if (name == "overhead_grid") return check_overhead_grid(opt);
  if (name == "angle_sweep") return check_angle_sweep(opt);
  if (name == "collision") return check_collision(opt);
  if (name == "shapes") return check_shapes(opt);
  if (name == "kernels") return check_kernels(opt);
  throw ValueError("unknown check: " + name +
                   " (have equivalence, reduction, gradcheck, overhead, "
                   "overhead_grid, angle_sweep, collision, shapes, kernels)");
}

}  // namespace icnn
