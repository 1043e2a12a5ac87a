#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "icnn/data.hpp"
#include "icnn/error.hpp"
#include "icnn/model.hpp"
#include "icnn/train.hpp"

using namespace icnn;

namespace {

// leaf parameter with a chosen gradient, produced through a real tape
Tensor leaf_with_grad(const std::vector<double>& values,
                      const std::vector<double>& grad) {
  Tensor p = Tensor::from_data({int64_t(values.size())}, values)
                 .set_requires_grad(true);
  Tensor g = Tensor::from_data({int64_t(grad.size())}, grad);
  sum(mul(p, g)).backward();
  return p;
}

Network dense_head(int64_t width, uint64_t seed) {
  ModelSpec s = ModelSpec::from_json_text(
      R"({"name": "head", "input": [1, 28, 28], "layers": [
          {"kind": "flatten"}, {"kind": "dense", "width": )" +
      std::to_string(width) + "}]}");
  return build_model(s, seed);
}

bool same_metrics(const std::vector<MetricsRecord>& a,
                  const std::vector<MetricsRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].epoch != b[i].epoch || a[i].lr != b[i].lr ||
        a[i].train_loss != b[i].train_loss ||
        a[i].train_acc != b[i].train_acc ||
        a[i].eval_loss != b[i].eval_loss || a[i].eval_acc != b[i].eval_acc)
      return false;
  return true;
}

std::vector<double> flat_params(Network& net) {
  std::vector<double> out;
  for (auto& p : net.params())
    out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());

  auto reject = [](auto&& tweak) {
    TrainConfig c;
    tweak(c);
    CHECK_THROWS_AS(c.validate(), ValueError);
  };
  reject([](TrainConfig& c) { c.lr0 = 0.0; });
  reject([](TrainConfig& c) { c.lr0 = -0.1; });
  reject([](TrainConfig& c) { c.momentum = -0.1; });
  reject([](TrainConfig& c) { c.momentum = 1.0; });
  reject([](TrainConfig& c) { c.weight_decay = -1e-4; });
  reject([](TrainConfig& c) { c.epochs = -1; });
  reject([](TrainConfig& c) { c.batch_size = 0; });
  reject([](TrainConfig& c) { c.lr_drop_every = -1; });
  reject([](TrainConfig& c) { c.lr_drop_factor = 0.0; });
}

TEST_CASE("step decay schedule") {
  TrainConfig cfg;
  cfg.lr0 = 0.1;
  cfg.lr_drop_every = 30;
  cfg.lr_drop_factor = 0.1;
  CHECK(lr_at(0, cfg) == doctest::Approx(0.1));
  CHECK(lr_at(29, cfg) == doctest::Approx(0.1));
  CHECK(lr_at(30, cfg) == doctest::Approx(0.01));
  CHECK(lr_at(59, cfg) == doctest::Approx(0.01));
  CHECK(lr_at(60, cfg) == doctest::Approx(0.001));

  cfg.lr_drop_every = 0;
  CHECK(lr_at(500, cfg) == 0.1);
}

TEST_CASE("sgd without momentum moves against the gradient") {
  Tensor p = leaf_with_grad({1.0, 2.0}, {1.0, -2.0});
  std::vector<ParamRef> params = {{"p", p, false}};
  std::vector<std::vector<double>> vel;
  TrainConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  sgd_step(params, vel, cfg, 0.1);
  CHECK(p.values()[0] == doctest::Approx(0.9));
  CHECK(p.values()[1] == doctest::Approx(2.2));
  CHECK_FALSE(p.has_grad());  // gradients are consumed by the step
}

TEST_CASE("momentum accumulates velocity across steps") {
  Tensor p = leaf_with_grad({1.0}, {1.0});
  std::vector<ParamRef> params = {{"p", p, false}};
  std::vector<std::vector<double>> vel;
  TrainConfig cfg;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  sgd_step(params, vel, cfg, 0.1);
  CHECK(p.values()[0] == doctest::Approx(0.9));  // v = 1

  sum(mul(p, Tensor::from_data({1}, {1.0}))).backward();
  sgd_step(params, vel, cfg, 0.1);
  // v = 0.9*1 + 1 = 1.9, so the second step is nearly twice the first
  CHECK(p.values()[0] == doctest::Approx(0.9 - 0.19));
}

TEST_CASE("weight decay shrinks parameters and respects the gate exemption") {
  TrainConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 1e-4;

  Tensor w = leaf_with_grad({1.0}, {0.0});
  Tensor gate = leaf_with_grad({1.0}, {0.0});
  std::vector<ParamRef> params = {{"w", w, false}, {"gate", gate, true}};
  std::vector<std::vector<double>> vel;
  sgd_step(params, vel, cfg, 0.1);
  CHECK(w.values()[0] == doctest::Approx(1.0 - 1e-5));
  CHECK(gate.values()[0] == doctest::Approx(1.0 - 1e-5));

  Tensor w2 = leaf_with_grad({1.0}, {0.0});
  Tensor gate2 = leaf_with_grad({1.0}, {0.0});
  std::vector<ParamRef> params2 = {{"w", w2, false}, {"gate", gate2, true}};
  std::vector<std::vector<double>> vel2;
  cfg.decay_exempt_norm_gate = true;
  sgd_step(params2, vel2, cfg, 0.1);
  CHECK(w2.values()[0] == doctest::Approx(1.0 - 1e-5));
  CHECK(gate2.values()[0] == 1.0);
}

TEST_CASE("parameters without a gradient are left alone") {
  Tensor p = Tensor::from_data({1}, {5.0}).set_requires_grad(true);
  std::vector<ParamRef> params = {{"p", p, false}};
  std::vector<std::vector<double>> vel;
  TrainConfig cfg;
  sgd_step(params, vel, cfg, 0.1);
  CHECK(p.values()[0] == 5.0);
}

TEST_CASE("evaluate reports exact loss and accuracy for known logits") {
  // flatten + identity dense: logits equal the two input pixels
  ModelSpec s = ModelSpec::from_json_text(R"({
    "name": "ident", "input": [2, 1, 1],
    "layers": [{"kind": "flatten"},
               {"kind": "dense", "width": 2, "bias": false}]})");
  Network net = build_model(s, 0);
  net.params()[0].tensor.mutable_values() = {1.0, 0.0, 0.0, 1.0};

  LabeledDataset ds;
  ds.images = Tensor::from_data({4, 2, 1, 1},
                                {0.9, 0.1, 0.1, 0.9, 0.7, 0.3, 0.2, 0.8});
  ds.labels = {0, 1, 0, 1};
  ds.num_classes = 2;

  auto [loss, acc] = evaluate(net, ds, 4);
  CHECK(acc == 1.0);
  double expect = 0.0;
  const double pairs[4][2] = {{0.9, 0.1}, {0.1, 0.9}, {0.7, 0.3}, {0.2, 0.8}};
  for (int i = 0; i < 4; ++i) {
    double a = pairs[i][0], b = pairs[i][1];
    double hit = ds.labels[size_t(i)] == 0 ? a : b;
    expect += std::log(std::exp(a) + std::exp(b)) - hit;
  }
  expect /= 4.0;
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));

  // zero weights: uniform logits, ties resolve to class 0
  net.params()[0].tensor.mutable_values() = {0.0, 0.0, 0.0, 0.0};
  auto [loss0, acc0] = evaluate(net, ds, 4);
  CHECK(loss0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(acc0 == 0.5);

  CHECK_THROWS_AS(evaluate(net, LabeledDataset{}, 4), ValueError);
}

TEST_CASE("evaluate does not depend on the batch partition") {
  Network net = dense_head(10, 4);
  LabeledDataset ds = synthetic_digits(13, 9);
  auto [l0, a0] = evaluate(net, ds, 13);
  for (int64_t bs : {1, 2, 3, 5, 7, 50}) {
    auto [l, a] = evaluate(net, ds, bs);
    CHECK(l == doctest::Approx(l0).epsilon(1e-12));
    CHECK(a == a0);
  }
}

TEST_CASE("training runs are deterministic in everything but wall time") {
  LabeledDataset train = synthetic_digits(64, 11);
  LabeledDataset eval = synthetic_digits(16, 12);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.lr0 = 0.05;
  cfg.seed = 7;
  Augmenter aug;
  aug.pad = 1;
  aug.flip_prob = 0.5;
  aug.seed = 7;

  Network n1 = dense_head(10, 21);
  Network n2 = dense_head(10, 21);
  auto r1 = train_epochs(n1, train, eval, cfg, &aug);
  auto r2 = train_epochs(n2, train, eval, cfg, &aug);
  CHECK(same_metrics(r1, r2));
  CHECK(flat_params(n1) == flat_params(n2));

  // a different shuffle seed gives a different trajectory
  Network n3 = dense_head(10, 21);
  TrainConfig cfg3 = cfg;
  cfg3.seed = 8;
  auto r3 = train_epochs(n3, train, eval, cfg3, &aug);
  CHECK_FALSE(same_metrics(r1, r3));

  // augmentation itself changes the batches
  Network n4 = dense_head(10, 21);
  auto r4 = train_epochs(n4, train, eval, cfg, nullptr);
  CHECK_FALSE(same_metrics(r1, r4));
}

TEST_CASE("loss descends on an easy corpus and records are well formed") {
  LabeledDataset ds = synthetic_digits(128, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.lr0 = 0.1;
  cfg.seed = 2;
  Network net = dense_head(10, 3);
  auto recs = train_epochs(net, ds, ds, cfg);
  REQUIRE(recs.size() == 3);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].epoch == int64_t(i + 1));
    CHECK(recs[i].lr == 0.1);
    CHECK(std::isfinite(recs[i].train_loss));
    CHECK(recs[i].wall_seconds >= 0.0);
  }
  CHECK(recs[2].train_loss < recs[0].train_loss);
  CHECK(recs[2].eval_acc > 0.8);

  Network net0 = dense_head(10, 3);
  TrainConfig zero = cfg;
  zero.epochs = 0;
  CHECK(train_epochs(net0, ds, ds, zero).empty());

  CHECK_THROWS_AS(train_epochs(net0, LabeledDataset{}, ds, cfg), ValueError);
}

TEST_CASE("divergence raises an error naming the epoch and batch") {
  LabeledDataset ds = synthetic_digits(8, 6);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 8;
  cfg.lr0 = 1e200;  // overflows parameters to inf within a few steps
  cfg.momentum = 0.0;
  cfg.seed = 1;
  Network net = dense_head(10, 5);
  try {
    train_epochs(net, ds, ds, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    std::string msg = e.what();
    CHECK(msg.find("non-finite loss at epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}
