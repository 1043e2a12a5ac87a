#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "icnn/checks.hpp"
#include "icnn/model.hpp"

using namespace icnn;

namespace {

ModelSpec one_layer(const std::string& layers_json,
                    const std::string& input = "[64, 16, 16]") {
  return ModelSpec::from_json_text(std::string(R"({"name": "t", "input": )") +
                                   input + R"(, "layers": [)" + layers_json +
                                   "]}");
}

const CostRow& find_row(const CostReport& r, const std::string& prefix) {
  for (const auto& row : r.rows)
    if (row.layer.rfind(prefix, 0) == 0) return row;
  throw std::runtime_error("no cost row starts with " + prefix);
}

}  // namespace

TEST_CASE("model json parsing and validation") {
  ModelSpec s = ModelSpec::from_json_text(R"({
    "name": "tiny",
    "input": [1, 8, 8],
    "layers": [
      {"kind": "conv", "out_channels": 2, "kernel": 3, "padding": 1},
      {"kind": "relu"},
      {"kind": "flatten"},
      {"kind": "dense", "width": 10}
    ]
  })");
  CHECK(s.name == "tiny");
  CHECK(s.input == Shape{1, 8, 8});
  CHECK(s.layers.size() == 4);
  CHECK(s.layers[0].out_channels == 2);
  CHECK(s.layers[3].bias);  // dense defaults to carrying a bias

  // round trip preserves the structure
  ModelSpec rt = ModelSpec::from_json_text(s.to_json_text());
  CHECK(rt.to_json_text() == s.to_json_text());

  CHECK_THROWS_AS(ModelSpec::from_json_text("not json"), ParseError);
  CHECK_THROWS_AS(ModelSpec::from_json_text(R"({"input": [1]})"), ParseError);
  CHECK_THROWS_AS(one_layer(R"({"kind": "warp"})"), ParseError);
  CHECK_THROWS_AS(one_layer(R"({"kind": "conv", "outch": 4})"), ParseError);
  CHECK_THROWS_AS(one_layer(R"({"kind": "dense", "kernel": 3})"), ParseError);

  // a 1x1 gated conv parses but is refused at use: its sliding-window sum
  // would just be the pixel itself
  ModelSpec k1 = one_layer(
      R"({"kind": "ic_conv", "out_channels": 4, "kernel": 1})", "[3, 8, 8]");
  Network net = build_model(k1, 0);
  CHECK_THROWS_AS(net.forward(Tensor::zeros({1, 3, 8, 8})), ValueError);
}

TEST_CASE("build seeds are deterministic and shape errors name the layer") {
  ModelSpec s = one_layer(
      R"({"kind": "conv", "out_channels": 4, "kernel": 3, "padding": 1, "bias": true})",
      "[3, 8, 8]");
  Network a = build_model(s, 7);
  Network b = build_model(s, 7);
  Network c = build_model(s, 8);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].tensor.values() == pb[i].tensor.values());
  CHECK(pa[0].tensor.values() != pc[0].tensor.values());

  ModelSpec bad = one_layer(
      R"({"kind": "dense", "width": 10})", "[3, 8, 8]");  // dense on rank-3
  try {
    build_model(bad, 0);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("a 2 to 1 dense model holds three parameters") {
  ModelSpec s = one_layer(R"({"kind": "dense", "width": 1})", "[2]");
  Network net = build_model(s, 0);
  CHECK(count_params(net).total_params == 3);
}

TEST_CASE("parameter accounting for the conv to gated-conv swap") {
  // k=3, 64 -> 128
  ModelSpec conv = one_layer(
      R"({"kind": "conv", "out_channels": 128, "kernel": 3, "padding": 1})");
  ModelSpec ic = one_layer(
      R"({"kind": "ic_conv", "out_channels": 128, "kernel": 3, "padding": 1})");
  int64_t base = count_params(build_model(conv, 0)).total_params;
  int64_t gated = count_params(build_model(ic, 0)).total_params;
  CHECK(base == 73728);
  CHECK(gated - base == 8192);
  CHECK((gated - base) * 9 == base);  // exactly 1/k^2 of the original

  // k=5, 16 -> 16
  ModelSpec conv5 = one_layer(
      R"({"kind": "conv", "out_channels": 16, "kernel": 5, "padding": 2})",
      "[16, 16, 16]");
  ModelSpec ic5 = one_layer(
      R"({"kind": "ic_conv", "out_channels": 16, "kernel": 5, "padding": 2})",
      "[16, 16, 16]");
  int64_t base5 = count_params(build_model(conv5, 0)).total_params;
  int64_t gated5 = count_params(build_model(ic5, 0)).total_params;
  CHECK(base5 == 6400);
  CHECK(gated5 - base5 == 256);
  CHECK((gated5 - base5) * 25 == base5);
}

TEST_CASE("mac accounting for conv and the gated overhead") {
  ModelSpec conv = one_layer(
      R"({"kind": "conv", "out_channels": 128, "kernel": 3, "padding": 1})");
  Network net = build_model(conv, 0);
  CostReport r = count_costs(net, conv.input);
  CHECK(r.total_macs == 73728LL * 256LL);

  ModelSpec ic = one_layer(
      R"({"kind": "ic_conv", "out_channels": 128, "kernel": 3, "padding": 1})");
  CostReport ri = count_costs(build_model(ic, 0), ic.input);
  double measured = double(ri.total_macs - r.total_macs) / double(r.total_macs);
  double predicted = 1.0 / 128.0 + 1.0 / 9.0;
  CHECK(std::fabs(measured - predicted) <= 0.15 * predicted);
}

TEST_CASE("dense layers are untouched by conv accounting") {
  ModelSpec s = one_layer(R"({"kind": "dense", "width": 32, "bias": true})",
                          "[100]");
  PairedVariants pv = paired_variants(s);
  int64_t base = count_params(build_model(pv.baseline, 0)).total_params;
  int64_t lay = count_params(build_model(pv.ic_layer, 0)).total_params;
  CHECK(base == 100 * 32 + 32);
  CHECK(lay == base);
}

TEST_CASE("paired variants map layers by the stated rules") {
  ModelSpec s = ModelSpec::from_json_text(R"({
    "name": "mixed",
    "input": [3, 16, 16],
    "layers": [
      {"kind": "conv", "out_channels": 8, "kernel": 3, "padding": 1},
      {"kind": "bn"},
      {"kind": "relu"},
      {"kind": "conv", "out_channels": 8, "kernel": 1},
      {"kind": "basic_block", "out_channels": 8},
      {"kind": "pool", "op": "global_avg"},
      {"kind": "flatten"},
      {"kind": "dense", "width": 10}
    ]
  })");
  PairedVariants pv = paired_variants(s);

  // layer variant: k>=2 convs swap, 1x1 convs are exempt
  CHECK(pv.ic_layer.layers[0].kind == "ic_conv");
  CHECK(pv.ic_layer.layers[3].kind == "conv");
  CHECK(pv.ic_layer.layers[4].kind == "basic_block");
  CHECK(pv.ic_layer.layers[4].ic_layers);

  // block variant: blocks swap for combining forms, plain convs get wrapped
  CHECK(pv.ic_block.layers[4].kind == "ic_basic_block");
  CHECK(pv.ic_block.layers[0].kind == "ic_conv_block");
  CHECK(pv.ic_block.layers[3].kind == "conv");

  // both gated variants strictly add parameters
  int64_t base = count_params(build_model(pv.baseline, 1)).total_params;
  int64_t lay = count_params(build_model(pv.ic_layer, 1)).total_params;
  int64_t blk = count_params(build_model(pv.ic_block, 1)).total_params;
  CHECK(base < lay);
  CHECK(base < blk);

  // the layer variant's delta is the sum of cout*cin over mapped convs
  // conv0: 8*3; block: two 3x3 convs 8*8 each
  CHECK(lay - base == 8 * 3 + 8 * 8 + 8 * 8);
}

TEST_CASE("variants keep identical initial draws where shapes coincide") {
  ModelSpec s = ModelSpec::from_json_text(R"({
    "name": "seeded",
    "input": [3, 8, 8],
    "layers": [
      {"kind": "conv", "out_channels": 4, "kernel": 3, "padding": 1},
      {"kind": "bn"},
      {"kind": "relu"},
      {"kind": "flatten"},
      {"kind": "dense", "width": 10}
    ]
  })");
  PairedVariants pv = paired_variants(s);
  Network base = build_model(pv.baseline, 5);
  Network lay = build_model(pv.ic_layer, 5);

  auto grab = [](Network& n, const std::string& name) {
    for (auto& p : n.params())
      if (p.name == name) return p.tensor;
    throw std::runtime_error("missing param " + name);
  };
  // conv at index 0 and dense at index 4 keep their shapes across variants
  CHECK(grab(base, "0.weight").values() == grab(lay, "0.weight").values());
  CHECK(grab(base, "4.weight").values() == grab(lay, "4.weight").values());
}

TEST_CASE("all three variants preserve every intermediate shape") {
  for (uint64_t seed = 100; seed < 110; ++seed) {
    ModelSpec s = random_model_spec(seed);
    PairedVariants pv = paired_variants(s);
    Network a = build_model(pv.baseline, 3);
    Network b = build_model(pv.ic_layer, 3);
    Network c = build_model(pv.ic_block, 3);
    CHECK(a.layer_shapes() == b.layer_shapes());
    CHECK(a.layer_shapes() == c.layer_shapes());
  }
}

TEST_CASE("shipped configs parse, build, and report costs") {
  const char* names[] = {"cnn4", "mini_resnet", "bottleneck_toy"};
  for (const char* n : names) {
    ModelSpec s = ModelSpec::from_json_file(
        std::string(ICNN_SOURCE_DIR) + "/configs/" + n + ".json");
    PairedVariants pv = paired_variants(s);
    Network net = build_model(pv.ic_block, 0);
    CostReport r = count_costs(net, s.input);
    CHECK(r.total_params > 0);
    CHECK(r.total_macs > 0);
    CHECK(r.rows.size() == net.layers.size());

    int64_t psum = 0, msum = 0;
    for (const auto& row : r.rows) {
      psum += row.params;
      msum += row.macs;
    }
    CHECK(psum == r.total_params);
    CHECK(msum == r.total_macs);
  }
}

TEST_CASE("cnn4 cost totals are pinned across the three variants") {
  ModelSpec s = ModelSpec::from_json_file(std::string(ICNN_SOURCE_DIR) +
                                          "/configs/cnn4.json");
  PairedVariants pv = paired_variants(s);
  const ModelSpec* specs[3] = {&pv.baseline, &pv.ic_layer, &pv.ic_block};
  const int64_t params[3] = {52162, 52298, 52210};
  const int64_t macs[3] = {351872, 404400, 391856};
  for (int i = 0; i < 3; ++i) {
    Network net = build_model(*specs[i], 0);
    CostReport r = count_costs(net, s.input);
    CHECK(r.total_params == params[i]);
    CHECK(r.total_macs == macs[i]);
  }
}

TEST_CASE("cost report rows carry layer descriptions") {
  ModelSpec s = one_layer(
      R"({"kind": "conv", "out_channels": 2, "kernel": 3, "padding": 1, "bias": true})",
      "[1, 4, 4]");
  Network net = build_model(s, 0);
  CostReport r = count_costs(net, s.input);
  const CostRow& row = find_row(r, "conv");
  CHECK(row.params == 2 * 9 + 2);
  CHECK(row.macs == 9 * 1 * 2 * 16);
}
