#include "icnn/ic.hpp"

#include <cmath>

#include "icnn/kernels.hpp"

namespace icnn {

namespace {

Tensor apply_act(const Tensor& t, Activation f) {
  return f == Activation::relu ? relu(t) : t;
}

void check_ic_dense(const Tensor& x, const ICDenseParams& p) {
  if (x.ndim() != 2 || p.weight.ndim() != 2)
    throw ShapeError("ic_dense expects x [B,N] and weight [M,N], got " +
                     shape_str(x.shape()) + " and " +
                     shape_str(p.weight.shape()));
  if (x.dim(1) != p.weight.dim(1))
    throw ShapeError("ic_dense fan-in mismatch: x has " +
                     std::to_string(x.dim(1)) + ", weight expects " +
                     std::to_string(p.weight.dim(1)));
  if (p.w_prime.ndim() != 1 || p.w_prime.dim(0) != p.weight.dim(0))
    throw ShapeError("w_prime must have one entry per output unit");
  if (p.bias_main.defined() && p.bias_main.numel() != p.weight.dim(0))
    throw ShapeError("bias_main length must equal output width");
  if (p.bias_inner.defined() && p.bias_inner.numel() != p.weight.dim(0))
    throw ShapeError("bias_inner length must equal output width");
}

}  // namespace

Tensor ic_dense_forward(const Tensor& x, const ICDenseParams& p,
                        Activation f) {
  check_ic_dense(x, p);
  Tensor z = matmul(x, p.weight, false, true);       // [B,M]
  Tensor xs = row_sum(x);                            // [B]
  Tensor gate = sub(z, outer(xs, p.w_prime));        // z - w' * sum(x)
  if (p.bias_inner.defined()) gate = add_row_bias(gate, p.bias_inner);
  Tensor main = p.bias_main.defined() ? add_row_bias(z, p.bias_main) : z;
  return apply_act(add(main, relu(gate)), f);
}

Tensor ic_dense_piecewise(const Tensor& x, const ICDenseParams& p,
                          Activation f) {
  check_ic_dense(x, p);
  const int64_t b = x.dim(0), n = x.dim(1), m = p.weight.dim(0);
  const auto& xv = x.values();
  const auto& wv = p.weight.values();
  const auto& wp = p.w_prime.values();
  std::vector<double> out(static_cast<size_t>(b * m));
  for (int64_t i = 0; i < b; ++i) {
    double xsum = 0.0;
    for (int64_t k = 0; k < n; ++k) xsum += xv[i * n + k];
    for (int64_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < n; ++k) s += wv[j * n + k] * xv[i * n + k];
      const double b1 = p.bias_main.defined() ? p.bias_main.values()[j] : 0.0;
      const double b2 =
          p.bias_inner.defined() ? p.bias_inner.values()[j] : 0.0;
      const double h = s - wp[j] * xsum + b2;
      double v = h >= 0.0 ? 2.0 * s - wp[j] * xsum + b1 + b2 : s + b1;
      if (f == Activation::relu && v < 0.0) v = 0.0;
      out[i * m + j] = v;
    }
  }
  return Tensor::from_data({b, m}, std::move(out));
}

Tensor rough_feature(const Tensor& x, int64_t k, int64_t stride,
                     int64_t padding) {
  if (x.ndim() != 4)
    throw ShapeError("rough_feature input must be [N,C,H,W], got " +
                     shape_str(x.shape()));
  if (k < 1) throw ValueError("rough_feature kernel must be >= 1");
  Tensor ones = Tensor::full({x.dim(1), k, k}, 1.0);
  return depthwise_conv2d(x, ones, stride, padding);
}

Tensor ic_conv_forward(const Tensor& x, const ICConvParams& p) {
  const Tensor& w = p.conv.weight;
  if (w.ndim() != 4)
    throw ShapeError("ic_conv weight must be [Cout,Cin,k,k], got " +
                     shape_str(w.shape()));
  const int64_t cout = w.dim(0), cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (kh != kw) throw ValueError("ic_conv supports square kernels only");
  if (kh < 2)
    throw ValueError(
        "ic_conv requires kernel >= 2: a 1x1 sliding-window sum is the pixel "
        "itself, so the gated branch would add no neighborhood information");
  if (p.mode == ICConvMode::grouped) {
    if (p.w_prime.ndim() != 2 || p.w_prime.dim(0) != cout ||
        p.w_prime.dim(1) != cin)
      throw ShapeError("grouped w_prime must be [Cout,Cin], got " +
                       shape_str(p.w_prime.shape()));
  } else {
    if (p.w_prime.ndim() != 1 || p.w_prime.dim(0) != cout)
      throw ShapeError("scalar w_prime must be [Cout], got " +
                       shape_str(p.w_prime.shape()));
  }

  Tensor main = conv2d(x, p.conv);
  Tensor rough = rough_feature(x, kh, p.conv.stride, p.conv.padding);

  Tensor contraction;
  if (p.mode == ICConvMode::grouped) {
    ConvParams cp;
    cp.weight = reshape(p.w_prime, {cout, cin, 1, 1});
    contraction = conv2d(rough, cp);
  } else {
    // w'_i times the channel-summed rough feature, written as a 1x1 conv
    // whose [Cout,Cin] weight repeats w' across input channels.
    ConvParams cp;
    cp.weight =
        reshape(outer(p.w_prime, Tensor::full({cin}, 1.0)), {cout, cin, 1, 1});
    contraction = conv2d(rough, cp);
  }
  return add(main, relu(sub(main, contraction)));
}

Tensor ic_combine(const Tensor& a, const Tensor& b, BatchNormState* bn) {
  if (a.shape() != b.shape())
    throw ShapeError("ic_combine shape mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor t = add(a, b);
  if (bn) t = batch_norm(t, *bn);
  return add(a, relu(t));
}

Tensor channel_mean_broadcast(const Tensor& x, int64_t out_channels) {
  if (x.ndim() != 4)
    throw ShapeError("channel_mean_broadcast input must be [N,C,H,W], got " +
                     shape_str(x.shape()));
  if (out_channels < 1) throw ValueError("out_channels must be >= 1");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const double inv = 1.0 / static_cast<double>(c);
  std::vector<double> out(static_cast<size_t>(n * out_channels * hw), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      const double* p = x.data() + (i * c + j) * hw;
      double* o = out.data() + i * out_channels * hw;
      for (int64_t k = 0; k < hw; ++k) o[k] += p[k] * inv;
    }
    const double* first = out.data() + i * out_channels * hw;
    for (int64_t m = 1; m < out_channels; ++m) {
      double* o = out.data() + (i * out_channels + m) * hw;
      for (int64_t k = 0; k < hw; ++k) o[k] = first[k];
    }
  }
  return Tensor::node(
      {n, out_channels, x.dim(2), x.dim(3)}, std::move(out), {x},
      [n, c, hw, out_channels, inv](Tensor::Impl& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.empty()) px.grad.assign(px.values.size(), 0.0);
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t k = 0; k < hw; ++k) {
            double acc = 0.0;
            for (int64_t m = 0; m < out_channels; ++m)
              acc += self.grad[(i * out_channels + m) * hw + k];
            const double gv = acc * inv;
            for (int64_t j = 0; j < c; ++j)
              px.grad[(i * c + j) * hw + k] += gv;
          }
        }
      });
}

namespace {

Tensor conv_maybe_ic(const Tensor& x, const ConvParams& conv,
                     const Tensor& wp) {
  if (!wp.defined()) return conv2d(x, conv);
  ICConvParams p;
  p.conv = conv;
  p.w_prime = wp;
  p.mode = ICConvMode::grouped;
  return ic_conv_forward(x, p);
}

Tensor block_tail(const Tensor& x, const Tensor& a, ICBlockParams& p) {
  Tensor merged = a;
  if (p.combine_bn) {
    Tensor b = rough_feature(x, 3, p.stride, 1);
    if (b.dim(1) != a.dim(1)) b = channel_mean_broadcast(b, a.dim(1));
    merged = ic_combine(a, b, &*p.combine_bn);
  }
  Tensor s = p.shortcut ? conv2d(x, *p.shortcut) : x;
  return relu(add(s, merged));
}

}  // namespace

Tensor ic_basic_block(const Tensor& x, ICBlockParams& p) {
  Tensor h = conv_maybe_ic(x, p.conv1, p.wp1);
  h = relu(batch_norm(h, p.bn1));
  h = conv_maybe_ic(h, p.conv2, p.wp2);
  Tensor a = batch_norm(h, p.bn2);
  return block_tail(x, a, p);
}

Tensor ic_bottleneck_block(const Tensor& x, ICBlockParams& p) {
  if (!p.conv3 || !p.bn3)
    throw ValueError("bottleneck block requires the third conv stage");
  Tensor h = relu(batch_norm(conv2d(x, p.conv1), p.bn1));
  h = conv_maybe_ic(h, p.conv2, p.wp2);
  h = relu(batch_norm(h, p.bn2));
  Tensor a = batch_norm(conv2d(h, *p.conv3), *p.bn3);
  return block_tail(x, a, p);
}

}  // namespace icnn
