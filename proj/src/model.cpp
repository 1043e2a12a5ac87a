#include "icnn/model.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "icnn/rng.hpp"
#include "json.hpp"

namespace icnn {

using nlohmann::json;

namespace {

// Stable stream ids so tensors of equal shape get equal draws across model
// variants that share a seed_tag.
enum Role : uint64_t {
  kWeight = 0,
  kBias = 1,
  kConv2Weight = 2,
  kConv3Weight = 3,
  kShortcutWeight = 4,
  kShortcutBias = 5,
};

Tensor he_normal(Rng& rng, const Shape& shape, int64_t fan_in) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& x : v) x = rng.normal(0.0, sd);
  return Tensor::from_data(shape, std::move(v)).set_requires_grad(true);
}

ConvParams make_conv(uint64_t seed, uint64_t tag, uint64_t role_w, int64_t cin,
                     int64_t cout, int64_t k, int64_t stride, int64_t padding,
                     bool bias) {
  ConvParams p;
  Rng rng(derive_seed(seed, tag, role_w));
  p.weight = he_normal(rng, {cout, cin, k, k}, cin * k * k);
  if (bias) p.bias = Tensor::zeros({cout}).set_requires_grad(true);
  p.stride = stride;
  p.padding = padding;
  return p;
}

void conv_shape(const Shape& in, int64_t k, int64_t stride, int64_t padding,
                int64_t cout, Shape& out) {
  const int64_t ho = (in[1] + 2 * padding - k) / stride + 1;
  const int64_t wo = (in[2] + 2 * padding - k) / stride + 1;
  if (ho < 1 || wo < 1)
    throw SpecError("convolution output extent non-positive");
  out = {cout, ho, wo};
}

std::string dims(const Shape& s) {
  std::string r;
  for (size_t i = 0; i < s.size(); ++i)
    r += (i ? "x" : "") + std::to_string(s[i]);
  return r;
}

class ConvLayer : public Layer {
 public:
  ConvLayer(ConvParams p, int64_t cin) : p_(std::move(p)), cin_(cin) {}
  Tensor forward(const Tensor& x) override { return conv2d(x, p_); }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", p_.weight, false});
    if (p_.bias.defined()) out.push_back({prefix + ".bias", p_.bias, false});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != cin_)
      throw SpecError("conv expects input channels " + std::to_string(cin_) +
                      ", got shape " + shape_str(in));
    Shape out;
    conv_shape(in, p_.weight.dim(2), p_.stride, p_.padding, p_.weight.dim(0),
               out);
    return out;
  }
  LayerCost cost(const Shape& in) const override {
    Shape out = out_shape(in);
    const int64_t k = p_.weight.dim(2);
    LayerCost c;
    c.params = p_.weight.numel() + (p_.bias.defined() ? p_.bias.numel() : 0);
    c.macs = k * k * cin_ * out[0] * out[1] * out[2];
    return c;
  }
  std::string describe() const override {
    return "conv " + dims(p_.weight.shape()) + " s" + std::to_string(p_.stride) +
           " p" + std::to_string(p_.padding);
  }
  ConvParams p_;
  int64_t cin_;
};

class ICConvLayer : public Layer {
 public:
  ICConvLayer(ICConvParams p, int64_t cin) : p_(std::move(p)), cin_(cin) {}
  Tensor forward(const Tensor& x) override { return ic_conv_forward(x, p_); }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", p_.conv.weight, false});
    if (p_.conv.bias.defined())
      out.push_back({prefix + ".bias", p_.conv.bias, false});
    out.push_back({prefix + ".w_prime", p_.w_prime, true});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != cin_)
      throw SpecError("ic_conv expects input channels " + std::to_string(cin_) +
                      ", got shape " + shape_str(in));
    Shape out;
    conv_shape(in, p_.conv.weight.dim(2), p_.conv.stride, p_.conv.padding,
               p_.conv.weight.dim(0), out);
    return out;
  }
  LayerCost cost(const Shape& in) const override {
    Shape out = out_shape(in);
    const int64_t k = p_.conv.weight.dim(2);
    const int64_t cout = out[0], hw = out[1] * out[2];
    LayerCost c;
    c.params = p_.conv.weight.numel() +
               (p_.conv.bias.defined() ? p_.conv.bias.numel() : 0) +
               p_.w_prime.numel();
    c.macs = k * k * cin_ * cout * hw;  // main conv
    c.macs += k * k * cin_ * hw;        // rough feature window sums
    c.macs += p_.mode == ICConvMode::grouped ? cin_ * cout * hw : cout * hw;
    return c;
  }
  std::string describe() const override {
    return std::string("ic_conv[") +
           (p_.mode == ICConvMode::grouped ? "grouped" : "scalar") + "] " +
           dims(p_.conv.weight.shape()) + " s" + std::to_string(p_.conv.stride) +
           " p" + std::to_string(p_.conv.padding);
  }
  ICConvParams p_;
  int64_t cin_;
};

// Block-style wrap of a single conv: u = c + relu(BN(c + rough(x))), where
// c = conv(x) and the rough feature of the layer input is channel-matched
// to the conv output.
class ICConvBlockLayer : public Layer {
 public:
  ICConvBlockLayer(ConvParams p, BatchNormState bn, int64_t cin)
      : p_(std::move(p)), bn_(std::move(bn)), cin_(cin) {}
  Tensor forward(const Tensor& x) override {
    Tensor c = conv2d(x, p_);
    Tensor b =
        rough_feature(x, p_.weight.dim(2), p_.stride, p_.padding);
    if (b.dim(1) != c.dim(1)) b = channel_mean_broadcast(b, c.dim(1));
    return ic_combine(c, b, &bn_);
  }
  void set_training(bool t) override { bn_.training = t; }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", p_.weight, false});
    if (p_.bias.defined()) out.push_back({prefix + ".bias", p_.bias, false});
    out.push_back({prefix + ".combine_gamma", bn_.gamma, true});
    out.push_back({prefix + ".combine_beta", bn_.beta, true});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != cin_)
      throw SpecError("ic_conv_block expects input channels " +
                      std::to_string(cin_) + ", got shape " + shape_str(in));
    Shape out;
    conv_shape(in, p_.weight.dim(2), p_.stride, p_.padding, p_.weight.dim(0),
               out);
    return out;
  }
  LayerCost cost(const Shape& in) const override {
    Shape out = out_shape(in);
    const int64_t k = p_.weight.dim(2);
    const int64_t hw = out[1] * out[2];
    LayerCost c;
    c.params = p_.weight.numel() +
               (p_.bias.defined() ? p_.bias.numel() : 0) + 2 * out[0];
    c.macs = k * k * cin_ * out[0] * hw;  // conv
    c.macs += k * k * cin_ * hw;          // rough feature
    c.macs += 2 * out[0] * hw;            // combine BN
    return c;
  }
  std::string describe() const override {
    return "ic_conv_block " + dims(p_.weight.shape()) + " s" +
           std::to_string(p_.stride) + " p" + std::to_string(p_.padding);
  }
  ConvParams p_;
  BatchNormState bn_;
  int64_t cin_;
};

class DenseLayer : public Layer {
 public:
  DenseLayer(Tensor w, Tensor b) : w_(std::move(w)), b_(std::move(b)) {}
  Tensor forward(const Tensor& x) override { return dense(x, w_, b_); }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", w_, false});
    if (b_.defined()) out.push_back({prefix + ".bias", b_, false});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 1 || in[0] != w_.dim(1))
      throw SpecError("dense expects flat input of width " +
                      std::to_string(w_.dim(1)) + ", got " + shape_str(in));
    return {w_.dim(0)};
  }
  LayerCost cost(const Shape& in) const override {
    (void)in;
    LayerCost c;
    c.params = w_.numel() + (b_.defined() ? b_.numel() : 0);
    c.macs = w_.numel();
    return c;
  }
  std::string describe() const override { return "dense " + dims(w_.shape()); }
  Tensor w_, b_;
};

class ICDenseLayer : public Layer {
 public:
  explicit ICDenseLayer(ICDenseParams p) : p_(std::move(p)) {}
  Tensor forward(const Tensor& x) override {
    return ic_dense_forward(x, p_, Activation::identity);
  }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", p_.weight, false});
    out.push_back({prefix + ".w_prime", p_.w_prime, true});
    if (p_.bias_main.defined())
      out.push_back({prefix + ".bias_main", p_.bias_main, false});
    if (p_.bias_inner.defined())
      out.push_back({prefix + ".bias_inner", p_.bias_inner, false});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 1 || in[0] != p_.weight.dim(1))
      throw SpecError("ic_dense expects flat input of width " +
                      std::to_string(p_.weight.dim(1)) + ", got " +
                      shape_str(in));
    return {p_.weight.dim(0)};
  }
  LayerCost cost(const Shape& in) const override {
    (void)in;
    LayerCost c;
    c.params = p_.weight.numel() + p_.w_prime.numel() +
               (p_.bias_main.defined() ? p_.bias_main.numel() : 0) +
               (p_.bias_inner.defined() ? p_.bias_inner.numel() : 0);
    c.macs = p_.weight.numel() + p_.weight.dim(0);
    return c;
  }
  std::string describe() const override {
    return "ic_dense " + dims(p_.weight.shape());
  }
  ICDenseParams p_;
};

class BNLayer : public Layer {
 public:
  explicit BNLayer(int64_t channels) : s_(BatchNormState::make(channels)) {}
  Tensor forward(const Tensor& x) override { return batch_norm(x, s_); }
  void set_training(bool t) override { s_.training = t; }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".gamma", s_.gamma, true});
    out.push_back({prefix + ".beta", s_.beta, true});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != s_.gamma.numel())
      throw SpecError("bn expects " + std::to_string(s_.gamma.numel()) +
                      " channels, got " + shape_str(in));
    return in;
  }
  LayerCost cost(const Shape& in) const override {
    LayerCost c;
    c.params = 2 * s_.gamma.numel();
    c.macs = 2 * in[0] * in[1] * in[2];
    return c;
  }
  std::string describe() const override {
    return "bn " + std::to_string(s_.gamma.numel());
  }
  BatchNormState s_;
};

class ReluLayer : public Layer {
 public:
  Tensor forward(const Tensor& x) override { return relu(x); }
  Shape out_shape(const Shape& in) const override { return in; }
  LayerCost cost(const Shape&) const override { return {}; }
  std::string describe() const override { return "relu"; }
};

class PoolLayer : public Layer {
 public:
  PoolLayer(std::string op, int64_t k, int64_t stride)
      : op_(std::move(op)), k_(k), stride_(stride) {}
  Tensor forward(const Tensor& x) override {
    if (op_ == "global_avg") return global_avg_pool(x);
    return pool(x, op_ == "max" ? PoolKind::max : PoolKind::avg, k_, stride_);
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3)
      throw SpecError("pool expects [C,H,W] input, got " + shape_str(in));
    if (op_ == "global_avg") return {in[0], 1, 1};
    const int64_t ho = (in[1] - k_) / stride_ + 1;
    const int64_t wo = (in[2] - k_) / stride_ + 1;
    if (in[1] < k_ || in[2] < k_)
      throw SpecError("pool window exceeds input " + shape_str(in));
    return {in[0], ho, wo};
  }
  LayerCost cost(const Shape& in) const override {
    LayerCost c;
    Shape out = out_shape(in);
    if (op_ != "max") c.macs = out[0] * out[1] * out[2];
    return c;
  }
  std::string describe() const override {
    if (op_ == "global_avg") return "pool global_avg";
    return "pool " + op_ + " k" + std::to_string(k_) + " s" +
           std::to_string(stride_);
  }
  std::string op_;
  int64_t k_, stride_;
};

class FlattenLayer : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3)
      throw SpecError("flatten expects [C,H,W] input, got " + shape_str(in));
    return {in[0] * in[1] * in[2]};
  }
  LayerCost cost(const Shape&) const override { return {}; }
  std::string describe() const override { return "flatten"; }
};

class BlockLayer : public Layer {
 public:
  BlockLayer(ICBlockParams p, bool bottleneck, int64_t cin, int64_t cout)
      : p_(std::move(p)), bottleneck_(bottleneck), cin_(cin), cout_(cout) {}
  Tensor forward(const Tensor& x) override {
    return bottleneck_ ? ic_bottleneck_block(x, p_) : ic_basic_block(x, p_);
  }
  void set_training(bool t) override {
    p_.bn1.training = t;
    p_.bn2.training = t;
    if (p_.bn3) p_.bn3->training = t;
    if (p_.combine_bn) p_.combine_bn->training = t;
  }
  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    auto conv = [&](const char* name, const ConvParams& c) {
      out.push_back({prefix + "." + name + ".weight", c.weight, false});
      if (c.bias.defined())
        out.push_back({prefix + "." + name + ".bias", c.bias, false});
    };
    auto bn = [&](const char* name, BatchNormState& s) {
      out.push_back({prefix + "." + name + ".gamma", s.gamma, true});
      out.push_back({prefix + "." + name + ".beta", s.beta, true});
    };
    conv("conv1", p_.conv1);
    if (p_.wp1.defined()) out.push_back({prefix + ".conv1.w_prime", p_.wp1, true});
    bn("bn1", p_.bn1);
    conv("conv2", p_.conv2);
    if (p_.wp2.defined()) out.push_back({prefix + ".conv2.w_prime", p_.wp2, true});
    bn("bn2", p_.bn2);
    if (p_.conv3) conv("conv3", *p_.conv3);
    if (p_.bn3) bn("bn3", *p_.bn3);
    if (p_.shortcut) conv("shortcut", *p_.shortcut);
    if (p_.combine_bn) bn("combine_bn", *p_.combine_bn);
  }
  Shape out_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != cin_)
      throw SpecError("block expects input channels " + std::to_string(cin_) +
                      ", got shape " + shape_str(in));
    const int64_t ho = (in[1] + 2 - 3) / p_.stride + 1;
    const int64_t wo = (in[2] + 2 - 3) / p_.stride + 1;
    if (ho < 1 || wo < 1) throw SpecError("block output extent non-positive");
    return {cout_, ho, wo};
  }
  LayerCost cost(const Shape& in) const override {
    Shape out = out_shape(in);
    const int64_t hw = out[1] * out[2];
    const int64_t hw_in = in[1] * in[2];
    LayerCost c;
    auto conv_cost = [&](const ConvParams& cp, int64_t out_hw) {
      const int64_t k = cp.weight.dim(2);
      c.params += cp.weight.numel() + (cp.bias.defined() ? cp.bias.numel() : 0);
      c.macs += k * k * cp.weight.dim(1) * cp.weight.dim(0) * out_hw;
    };
    auto bn_cost = [&](const BatchNormState& s, int64_t out_hw) {
      c.params += 2 * s.gamma.numel();
      c.macs += 2 * s.gamma.numel() * out_hw;
    };
    if (!bottleneck_) {
      conv_cost(p_.conv1, hw);  // stride lands on conv1
      bn_cost(p_.bn1, hw);
      conv_cost(p_.conv2, hw);
      bn_cost(p_.bn2, hw);
      if (p_.wp1.defined()) {
        c.params += p_.wp1.numel();
        c.macs += 9 * cin_ * hw + cin_ * p_.conv1.weight.dim(0) * hw;
      }
    } else {
      conv_cost(p_.conv1, hw_in);  // 1x1 at input resolution
      bn_cost(p_.bn1, hw_in);
      conv_cost(p_.conv2, hw);  // strided 3x3
      bn_cost(p_.bn2, hw);
      conv_cost(*p_.conv3, hw);
      bn_cost(*p_.bn3, hw);
    }
    if (p_.wp2.defined()) {
      const int64_t c2in = p_.conv2.weight.dim(1);
      c.params += p_.wp2.numel();
      c.macs += 9 * c2in * hw + c2in * p_.conv2.weight.dim(0) * hw;
    }
    if (p_.shortcut) conv_cost(*p_.shortcut, hw);
    if (p_.combine_bn) {
      // rough feature of the block input plus the combine BN
      c.macs += 9 * cin_ * hw;
      bn_cost(*p_.combine_bn, hw);
    }
    return c;
  }
  std::string describe() const override {
    std::string s = bottleneck_ ? "bottleneck" : "basic";
    if (p_.combine_bn) s = "ic_" + s;
    if (p_.wp2.defined()) s += "[ic_layers]";
    return s + "_block " + std::to_string(cin_) + "->" +
           std::to_string(cout_) + " s" + std::to_string(p_.stride);
  }
  ICBlockParams p_;
  bool bottleneck_;
  int64_t cin_, cout_;
};

Tensor ones_grad(const Shape& s) {
  return Tensor::full(s, 1.0).set_requires_grad(true);
}

}  // namespace

Tensor Network::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers) h = l->forward(h);
  return h;
}

void Network::set_training(bool training) {
  for (auto& l : layers) l->set_training(training);
}

std::vector<ParamRef> Network::params() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i]->collect(std::to_string(i), out);
  return out;
}

std::vector<Shape> Network::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape cur = input;
  for (const auto& l : layers) {
    cur = l->out_shape(cur);
    shapes.push_back(cur);
  }
  return shapes;
}

Network build_model(const ModelSpec& spec, uint64_t seed) {
  if (spec.input.empty())
    throw SpecError("model input shape missing");
  Network net;
  net.name = spec.name;
  net.input = spec.input;
  Shape cur = spec.input;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const uint64_t tag =
        ls.seed_tag >= 0 ? static_cast<uint64_t>(ls.seed_tag) : i;
    auto fail = [&](const std::string& why) -> SpecError {
      return SpecError("layer " + std::to_string(i) + " (" + ls.kind + "): " +
                       why);
    };
    try {
      if (ls.kind == "conv" || ls.kind == "ic_conv" ||
          ls.kind == "ic_conv_block") {
        if (cur.size() != 3) throw fail("needs [C,H,W] input");
        if (ls.out_channels < 1 || ls.kernel < 1)
          throw fail("out_channels and kernel must be positive");
        ConvParams cp = make_conv(seed, tag, kWeight, cur[0],
                                  ls.out_channels, ls.kernel, ls.stride,
                                  ls.padding, ls.bias);
        if (ls.kind == "conv") {
          net.layers.push_back(std::make_unique<ConvLayer>(std::move(cp), cur[0]));
        } else if (ls.kind == "ic_conv") {
          ICConvParams icp;
          icp.conv = std::move(cp);
          icp.mode = ls.ic_mode == "scalar" ? ICConvMode::scalar
                                            : ICConvMode::grouped;
          icp.w_prime = icp.mode == ICConvMode::grouped
                            ? ones_grad({ls.out_channels, cur[0]})
                            : ones_grad({ls.out_channels});
          net.layers.push_back(
              std::make_unique<ICConvLayer>(std::move(icp), cur[0]));
        } else {
          net.layers.push_back(std::make_unique<ICConvBlockLayer>(
              std::move(cp), BatchNormState::make(ls.out_channels), cur[0]));
        }
      } else if (ls.kind == "dense" || ls.kind == "ic_dense") {
        if (cur.size() != 1) throw fail("needs flattened input");
        if (ls.width < 1) throw fail("width must be positive");
        Rng rng(derive_seed(seed, tag, kWeight));
        Tensor w = he_normal(rng, {ls.width, cur[0]}, cur[0]);
        if (ls.kind == "dense") {
          Tensor b = ls.bias
                         ? Tensor::zeros({ls.width}).set_requires_grad(true)
                         : Tensor();
          net.layers.push_back(
              std::make_unique<DenseLayer>(std::move(w), std::move(b)));
        } else {
          ICDenseParams p;
          p.weight = std::move(w);
          p.w_prime = ones_grad({ls.width});
          if (ls.bias) {
            p.bias_main = Tensor::zeros({ls.width}).set_requires_grad(true);
            p.bias_inner = Tensor::zeros({ls.width}).set_requires_grad(true);
          }
          net.layers.push_back(std::make_unique<ICDenseLayer>(std::move(p)));
        }
      } else if (ls.kind == "bn") {
        if (cur.size() != 3) throw fail("needs [C,H,W] input");
        net.layers.push_back(std::make_unique<BNLayer>(cur[0]));
      } else if (ls.kind == "relu") {
        net.layers.push_back(std::make_unique<ReluLayer>());
      } else if (ls.kind == "pool") {
        if (ls.op != "max" && ls.op != "avg" && ls.op != "global_avg")
          throw fail("op must be max, avg, or global_avg");
        net.layers.push_back(
            std::make_unique<PoolLayer>(ls.op, ls.kernel, ls.stride));
      } else if (ls.kind == "flatten") {
        net.layers.push_back(std::make_unique<FlattenLayer>());
      } else if (ls.kind == "basic_block" || ls.kind == "ic_basic_block" ||
                 ls.kind == "bottleneck_block" ||
                 ls.kind == "ic_bottleneck_block") {
        if (cur.size() != 3) throw fail("needs [C,H,W] input");
        if (ls.out_channels < 1) throw fail("out_channels must be positive");
        const bool bottleneck = ls.kind == "bottleneck_block" ||
                                ls.kind == "ic_bottleneck_block";
        const bool combine = ls.kind == "ic_basic_block" ||
                             ls.kind == "ic_bottleneck_block";
        const int64_t cin = cur[0];
        const int64_t mid = ls.out_channels;
        const int64_t cout = bottleneck ? 4 * mid : mid;
        ICBlockParams p;
        p.stride = ls.stride;
        if (!bottleneck) {
          p.conv1 = make_conv(seed, tag, kWeight, cin, mid, 3,
                              ls.stride, 1, false);
          p.bn1 = BatchNormState::make(mid);
          p.conv2 = make_conv(seed, tag, kConv2Weight, mid, mid, 3, 1,
                              1, false);
          p.bn2 = BatchNormState::make(mid);
          if (ls.ic_layers) {
            p.wp1 = ones_grad({mid, cin});
            p.wp2 = ones_grad({mid, mid});
          }
        } else {
          p.conv1 =
              make_conv(seed, tag, kWeight, cin, mid, 1, 1, 0, false);
          p.bn1 = BatchNormState::make(mid);
          p.conv2 = make_conv(seed, tag, kConv2Weight, mid, mid, 3,
                              ls.stride, 1, false);
          p.bn2 = BatchNormState::make(mid);
          p.conv3 = make_conv(seed, tag, kConv3Weight, mid, cout, 1, 1,
                              0, false);
          p.bn3 = BatchNormState::make(cout);
          if (ls.ic_layers) p.wp2 = ones_grad({mid, mid});
        }
        if (ls.stride != 1 || cin != cout) {
          ConvParams sc = make_conv(seed, tag, kShortcutWeight,
                                    cin, cout, 1, ls.stride, 0, true);
          p.shortcut = std::move(sc);
        }
        if (combine) p.combine_bn = BatchNormState::make(cout);
        net.layers.push_back(
            std::make_unique<BlockLayer>(std::move(p), bottleneck, cin, cout));
      } else {
        throw fail("unknown layer kind");
      }
      cur = net.layers.back()->out_shape(cur);
    } catch (const SpecError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  return net;
}

CostReport count_params(const Network& net) {
  CostReport r;
  auto& layers = const_cast<Network&>(net).layers;
  for (size_t i = 0; i < layers.size(); ++i) {
    std::vector<ParamRef> ps;
    layers[i]->collect(std::to_string(i), ps);
    CostRow row;
    row.layer = layers[i]->describe();
    for (const auto& p : ps) row.params += p.tensor.numel();
    r.rows.push_back(row);
    r.total_params += row.params;
  }
  return r;
}

CostReport count_costs(const Network& net, const Shape& input) {
  CostReport r;
  Shape cur = input;
  for (const auto& l : net.layers) {
    LayerCost c = l->cost(cur);
    r.rows.push_back({l->describe(), c.params, c.macs});
    r.total_params += c.params;
    r.total_macs += c.macs;
    cur = l->out_shape(cur);
  }
  return r;
}

std::string CostReport::to_json_text() const {
  json j;
  j["layers"] = json::array();
  for (const auto& row : rows) {
    j["layers"].push_back({{"layer", row.layer},
                           {"params", row.params},
                           {"macs", row.macs},
                           {"flops", 2 * row.macs}});
  }
  j["total_params"] = total_params;
  j["total_macs"] = total_macs;
  j["total_flops"] = 2 * total_macs;
  return j.dump(2);
}

namespace {

const std::unordered_set<std::string> kKinds = {
    "conv",        "ic_conv",        "ic_conv_block",
    "dense",       "ic_dense",       "bn",
    "relu",        "pool",           "flatten",
    "basic_block", "ic_basic_block", "bottleneck_block",
    "ic_bottleneck_block"};

std::unordered_set<std::string> allowed_fields(const std::string& kind) {
  std::unordered_set<std::string> f = {"kind", "seed_tag"};
  if (kind == "conv" || kind == "ic_conv_block") {
    f.insert({"out_channels", "kernel", "stride", "padding", "bias"});
  } else if (kind == "ic_conv") {
    f.insert({"out_channels", "kernel", "stride", "padding", "bias",
              "ic_mode"});
  } else if (kind == "dense" || kind == "ic_dense") {
    f.insert({"width", "bias"});
  } else if (kind == "pool") {
    f.insert({"op", "kernel", "stride"});
  } else if (kind == "basic_block" || kind == "ic_basic_block" ||
             kind == "bottleneck_block" || kind == "ic_bottleneck_block") {
    f.insert({"out_channels", "stride", "ic_layers"});
  }
  return f;
}

LayerSpec parse_layer(const json& j, size_t idx) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("layer " + std::to_string(idx) + ": " + why);
  };
  if (!j.is_object()) throw fail("must be an object");
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw fail("missing string field 'kind'");
  LayerSpec ls;
  ls.kind = j.at("kind").get<std::string>();
  if (!kKinds.count(ls.kind)) throw fail("unknown kind '" + ls.kind + "'");
  const auto allowed = allowed_fields(ls.kind);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw fail("unknown field '" + it.key() + "' for kind '" + ls.kind +
                 "'");
  auto geti = [&](const char* key, int64_t dflt) -> int64_t {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number_integer()) throw fail(std::string(key) + " must be an integer");
    return j.at(key).get<int64_t>();
  };
  auto getb = [&](const char* key, bool dflt) -> bool {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_boolean()) throw fail(std::string(key) + " must be a boolean");
    return j.at(key).get<bool>();
  };
  ls.out_channels = geti("out_channels", 0);
  ls.kernel = geti("kernel", 0);
  ls.stride = geti("stride", 1);
  ls.padding = geti("padding", 0);
  ls.bias = getb("bias", ls.kind == "dense" || ls.kind == "ic_dense");
  ls.width = geti("width", 0);
  ls.ic_layers = getb("ic_layers", false);
  ls.seed_tag = geti("seed_tag", -1);
  if (j.contains("ic_mode")) {
    ls.ic_mode = j.at("ic_mode").get<std::string>();
    if (ls.ic_mode != "grouped" && ls.ic_mode != "scalar")
      throw fail("ic_mode must be grouped or scalar");
  }
  if (j.contains("op")) {
    ls.op = j.at("op").get<std::string>();
  }
  if (ls.kind == "pool") {
    if (ls.op.empty()) throw fail("pool requires 'op'");
    if (ls.op != "global_avg" && (ls.kernel < 1 || ls.stride < 1))
      throw fail("pool requires kernel and stride");
  }
  return ls;
}

}  // namespace

ModelSpec ModelSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model spec must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "name" && it.key() != "input" && it.key() != "layers")
      throw ParseError("unknown top-level field '" + it.key() + "'");
  ModelSpec spec;
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (!j.contains("input") || !j.at("input").is_array())
    throw ParseError("model spec requires an 'input' shape array");
  for (const auto& v : j.at("input")) {
    if (!v.is_number_integer() || v.get<int64_t>() < 1)
      throw ParseError("'input' entries must be positive integers");
    spec.input.push_back(v.get<int64_t>());
  }
  if (spec.input.size() != 1 && spec.input.size() != 3)
    throw ParseError("'input' must be [D] or [C,H,W]");
  if (!j.contains("layers") || !j.at("layers").is_array())
    throw ParseError("model spec requires a 'layers' array");
  size_t idx = 0;
  for (const auto& lj : j.at("layers")) spec.layers.push_back(parse_layer(lj, idx++));
  return spec;
}

ModelSpec ModelSpec::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ModelSpec::to_json_text() const {
  json j;
  j["name"] = name;
  j["input"] = input;
  j["layers"] = json::array();
  for (const auto& ls : layers) {
    json lj;
    lj["kind"] = ls.kind;
    if (ls.kind == "conv" || ls.kind == "ic_conv" ||
        ls.kind == "ic_conv_block") {
      lj["out_channels"] = ls.out_channels;
      lj["kernel"] = ls.kernel;
      lj["stride"] = ls.stride;
      lj["padding"] = ls.padding;
      lj["bias"] = ls.bias;
      if (ls.kind == "ic_conv") lj["ic_mode"] = ls.ic_mode;
    } else if (ls.kind == "dense" || ls.kind == "ic_dense") {
      lj["width"] = ls.width;
      lj["bias"] = ls.bias;
    } else if (ls.kind == "pool") {
      lj["op"] = ls.op;
      if (ls.op != "global_avg") {
        lj["kernel"] = ls.kernel;
        lj["stride"] = ls.stride;
      }
    } else if (ls.kind.ends_with("_block")) {
      lj["out_channels"] = ls.out_channels;
      lj["stride"] = ls.stride;
      if (ls.ic_layers) lj["ic_layers"] = true;
    }
    if (ls.seed_tag >= 0) lj["seed_tag"] = ls.seed_tag;
    j["layers"].push_back(lj);
  }
  return j.dump(2);
}

PairedVariants paired_variants(const ModelSpec& base) {
  static const std::unordered_set<std::string> supported = {
      "conv", "dense",   "bn",          "relu",
      "pool", "flatten", "basic_block", "bottleneck_block"};
  for (size_t i = 0; i < base.layers.size(); ++i)
    if (!supported.count(base.layers[i].kind))
      throw SpecError("paired_variants expects a baseline spec; layer " +
                      std::to_string(i) + " has kind '" +
                      base.layers[i].kind + "'");

  PairedVariants v;
  v.baseline = base;
  v.ic_layer = base;
  v.ic_block = base;
  for (size_t i = 0; i < base.layers.size(); ++i) {
    const int64_t tag = static_cast<int64_t>(i);
    v.baseline.layers[i].seed_tag = tag;
    LayerSpec& bl = v.ic_layer.layers[i];
    bl.seed_tag = tag;
    if (bl.kind == "conv" && bl.kernel >= 2) {
      bl.kind = "ic_conv";
      bl.ic_mode = "grouped";
    } else if (bl.kind == "basic_block" || bl.kind == "bottleneck_block") {
      bl.ic_layers = true;
    }
    LayerSpec& kl = v.ic_block.layers[i];
    kl.seed_tag = tag;
    if (kl.kind == "conv" && kl.kernel >= 2) {
      kl.kind = "ic_conv_block";
    } else if (kl.kind == "basic_block") {
      kl.kind = "ic_basic_block";
    } else if (kl.kind == "bottleneck_block") {
      kl.kind = "ic_bottleneck_block";
    }
  }
  if (!v.baseline.name.empty()) {
    v.ic_layer.name = v.baseline.name + "-ic-layer";
    v.ic_block.name = v.baseline.name + "-ic-block";
  }
  return v;
}

}  // namespace icnn
