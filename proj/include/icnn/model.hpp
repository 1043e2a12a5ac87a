#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icnn/ic.hpp"
#include "icnn/ops.hpp"
#include "icnn/tensor.hpp"

namespace icnn {

// Declarative layer description. Field use depends on kind:
//   conv / ic_conv / ic_conv_block: out_channels, kernel, stride, padding,
//     bias (conv only), ic_mode (ic_conv only)
//   dense / ic_dense: width, bias
//   pool: op in {max, avg, global_avg}, kernel, stride
//   basic_block / bottleneck_block: out_channels (bottleneck: the 3x3 width;
//     block output is 4x that), stride, ic_layers (gate the inner convs)
//   ic_basic_block / ic_bottleneck_block: same fields, block-style combine
//   bn / relu / flatten: no fields
struct LayerSpec {
  std::string kind;
  int64_t out_channels = 0;
  int64_t kernel = 0;
  int64_t stride = 1;
  int64_t padding = 0;
  bool bias = false;
  std::string ic_mode = "grouped";
  int64_t width = 0;
  std::string op;
  bool ic_layers = false;
  // Init-stream tag; paired variants carry the base spec's layer index so
  // parameters with matching shapes get identical draws across variants.
  int64_t seed_tag = -1;
};

struct ModelSpec {
  std::string name;
  Shape input;  // [C,H,W] or [D]
  std::vector<LayerSpec> layers;

  static ModelSpec from_json_text(const std::string& text);
  static ModelSpec from_json_file(const std::string& path);
  std::string to_json_text() const;
};

struct ParamRef {
  std::string name;
  Tensor tensor;
  bool norm_or_gate = false;  // BN affine and w' entries, for decay exemption
};

struct LayerCost {
  int64_t params = 0;
  int64_t macs = 0;  // per batch element
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual void set_training(bool) {}
  virtual void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    (void)prefix;
    (void)out;
  }
  virtual Shape out_shape(const Shape& in) const = 0;
  virtual LayerCost cost(const Shape& in) const = 0;
  virtual std::string describe() const = 0;
};

class Network {
 public:
  std::string name;
  Shape input;
  std::vector<std::unique_ptr<Layer>> layers;

  Tensor forward(const Tensor& x);
  void set_training(bool training);
  std::vector<ParamRef> params();
  // Output shape after each layer (batch dimension excluded).
  std::vector<Shape> layer_shapes() const;
};

Network build_model(const ModelSpec& spec, uint64_t seed);

struct CostRow {
  std::string layer;
  int64_t params = 0;
  int64_t macs = 0;
};

// Parameter and multiply-accumulate accounting. MACs count multiplications
// that accumulate: conv k^2*Cin*Cout*Ho*Wo, depthwise window sums
// k^2*C*Ho*Wo, 1x1 contraction Cin*Cout*Ho*Wo, dense Din*Dout, batch norm 2
// per element, average pooling 1 per output. Plain additions, comparisons,
// and ReLU count zero. FLOPs, when reported, are 2x MACs.
struct CostReport {
  std::vector<CostRow> rows;
  int64_t total_params = 0;
  int64_t total_macs = 0;
  std::string to_json_text() const;
};

CostReport count_params(const Network& net);
CostReport count_costs(const Network& net, const Shape& input);

struct PairedVariants {
  ModelSpec baseline;
  ModelSpec ic_layer;  // conv(k>=2) -> ic_conv; blocks get inner IC convs
  ModelSpec ic_block;  // convs wrapped with the rough-feature combine; blocks
                       // swapped for their combining forms
};

PairedVariants paired_variants(const ModelSpec& base);

}  // namespace icnn
