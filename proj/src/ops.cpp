#include "icnn/ops.hpp"

#include <cmath>

#include "icnn/kernels.hpp"

namespace icnn {

BatchNormState BatchNormState::make(int64_t channels) {
  BatchNormState s;
  s.gamma = Tensor::full({channels}, 1.0).set_requires_grad(true);
  s.beta = Tensor::zeros({channels}).set_requires_grad(true);
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0);
  return s;
}

namespace {

kernels::Conv2dDims conv_dims(const Tensor& x, const Tensor& w, int64_t stride,
                              int64_t padding) {
  if (x.ndim() != 4) throw ShapeError("conv input must be [N,C,H,W], got " +
                                      shape_str(x.shape()));
  if (stride < 1) throw ValueError("stride must be >= 1");
  if (padding < 0) throw ValueError("padding must be >= 0");
  kernels::Conv2dDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.kh = w.dim(w.ndim() - 2);
  d.kw = w.dim(w.ndim() - 1);
  d.stride = stride;
  d.pad = padding;
  if (d.ho() < 1 || d.wo() < 1)
    throw ShapeError("conv output extent non-positive for input " +
                     shape_str(x.shape()) + " kernel " +
                     std::to_string(d.kh) + " stride " +
                     std::to_string(stride) + " pad " + std::to_string(padding));
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  if (p.weight.ndim() != 4)
    throw ShapeError("conv weight must be [Cout,Cin,kh,kw], got " +
                     shape_str(p.weight.shape()));
  kernels::Conv2dDims d = conv_dims(x, p.weight, p.stride, p.padding);
  if (p.weight.dim(1) != d.cin)
    throw ShapeError("conv channel mismatch: input has " +
                     std::to_string(d.cin) + ", weight expects " +
                     std::to_string(p.weight.dim(1)));
  if (p.bias.defined() && p.bias.numel() != d.cout)
    throw ShapeError("conv bias length must equal Cout");

  std::vector<double> out(static_cast<size_t>(d.n * d.cout * d.ho() * d.wo()));
  kernels::conv2d_fwd(x.data(), p.weight.data(),
                      p.bias.defined() ? p.bias.data() : nullptr, out.data(),
                      d);

  std::vector<Tensor> parents = {x, p.weight};
  const bool has_bias = p.bias.defined();
  if (has_bias) parents.push_back(p.bias);
  std::vector<double> xv = x.values();
  std::vector<double> wv = p.weight.values();
  return Tensor::node(
      {d.n, d.cout, d.ho(), d.wo()}, std::move(out), parents,
      [d, has_bias, xv = std::move(xv), wv = std::move(wv)](Tensor::Impl& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        if (px.requires_grad) {
          if (px.grad.empty()) px.grad.assign(px.values.size(), 0.0);
          kernels::conv2d_bwd_input(self.grad.data(), wv.data(),
                                    px.grad.data(), d);
        }
        if (pw.requires_grad) {
          if (pw.grad.empty()) pw.grad.assign(pw.values.size(), 0.0);
          kernels::conv2d_bwd_weight(self.grad.data(), xv.data(),
                                     pw.grad.data(), d);
        }
        if (has_bias) {
          auto& pb = *self.parents[2];
          if (pb.requires_grad) {
            if (pb.grad.empty()) pb.grad.assign(pb.values.size(), 0.0);
            kernels::conv2d_bwd_bias(self.grad.data(), pb.grad.data(), d);
          }
        }
      });
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& weight, int64_t stride,
                        int64_t padding) {
  if (weight.ndim() != 3)
    throw ShapeError("depthwise weight must be [C,kh,kw], got " +
                     shape_str(weight.shape()));
  kernels::Conv2dDims d = conv_dims(x, weight, stride, padding);
  d.cout = d.cin;
  if (weight.dim(0) != d.cin)
    throw ShapeError("depthwise channel mismatch: input has " +
                     std::to_string(d.cin) + ", weight has " +
                     std::to_string(weight.dim(0)));

  std::vector<double> out(static_cast<size_t>(d.n * d.cin * d.ho() * d.wo()));
  kernels::depthwise_fwd(x.data(), weight.data(), out.data(), d);

  std::vector<double> xv = x.values();
  std::vector<double> wv = weight.values();
  return Tensor::node(
      {d.n, d.cin, d.ho(), d.wo()}, std::move(out), {x, weight},
      [d, xv = std::move(xv), wv = std::move(wv)](Tensor::Impl& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        if (px.requires_grad) {
          if (px.grad.empty()) px.grad.assign(px.values.size(), 0.0);
          kernels::depthwise_bwd_input(self.grad.data(), wv.data(),
                                       px.grad.data(), d);
        }
        if (pw.requires_grad) {
          if (pw.grad.empty()) pw.grad.assign(pw.values.size(), 0.0);
          kernels::depthwise_bwd_weight(self.grad.data(), xv.data(),
                                        pw.grad.data(), d);
        }
      });
}

Tensor batch_norm(const Tensor& x, BatchNormState& state) {
  if (x.ndim() != 4)
    throw ShapeError("batch_norm input must be [N,C,H,W], got " +
                     shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (state.gamma.numel() != c)
    throw ShapeError("batch_norm channel mismatch: input has " +
                     std::to_string(c) + " channels, state has " +
                     std::to_string(state.gamma.numel()));
  const int64_t m = n * h * w;
  const int64_t hw = h * w;
  const double* xd = x.data();
  const auto& gamma = state.gamma.values();
  const auto& beta = state.beta.values();

  std::vector<double> out(x.values().size());
  std::vector<double> xhat(x.values().size());
  std::vector<double> inv_std(static_cast<size_t>(c));

  if (state.training) {
    if (m < 2)
      throw ValueError("batch_norm train mode needs N*H*W >= 2, got " +
                       std::to_string(m));
    std::vector<double> mu(static_cast<size_t>(c), 0.0);
    std::vector<double> var(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double* p = xd + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) mu[j] += p[k];
      }
    for (int64_t j = 0; j < c; ++j) mu[j] /= static_cast<double>(m);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double* p = xd + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) {
          const double d = p[k] - mu[j];
          var[j] += d * d;
        }
      }
    for (int64_t j = 0; j < c; ++j) var[j] /= static_cast<double>(m);

    for (int64_t j = 0; j < c; ++j)
      inv_std[j] = 1.0 / std::sqrt(var[j] + state.eps);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double* p = xd + (i * c + j) * hw;
        double* xh = xhat.data() + (i * c + j) * hw;
        double* o = out.data() + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) {
          xh[k] = (p[k] - mu[j]) * inv_std[j];
          o[k] = gamma[j] * xh[k] + beta[j];
        }
      }
    auto& rm = state.running_mean.mutable_values();
    auto& rv = state.running_var.mutable_values();
    for (int64_t j = 0; j < c; ++j) {
      rm[j] = (1.0 - state.momentum) * rm[j] + state.momentum * mu[j];
      rv[j] = (1.0 - state.momentum) * rv[j] + state.momentum * var[j];
    }
  } else {
    const auto& rm = state.running_mean.values();
    const auto& rv = state.running_var.values();
    for (int64_t j = 0; j < c; ++j)
      inv_std[j] = 1.0 / std::sqrt(rv[j] + state.eps);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double* p = xd + (i * c + j) * hw;
        double* xh = xhat.data() + (i * c + j) * hw;
        double* o = out.data() + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) {
          xh[k] = (p[k] - rm[j]) * inv_std[j];
          o[k] = gamma[j] * xh[k] + beta[j];
        }
      }
  }

  const bool training = state.training;
  std::vector<double> gammav = gamma;
  return Tensor::node(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [n, c, hw, m, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std),
       gammav = std::move(gammav)](Tensor::Impl& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        // per-channel sums of dy and dy*xhat serve every branch below
        std::vector<double> sum_dy(static_cast<size_t>(c), 0.0);
        std::vector<double> sum_dyx(static_cast<size_t>(c), 0.0);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j) {
            const double* g = self.grad.data() + (i * c + j) * hw;
            const double* xh = xhat.data() + (i * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) {
              sum_dy[j] += g[k];
              sum_dyx[j] += g[k] * xh[k];
            }
          }
        if (pg.requires_grad) {
          if (pg.grad.empty()) pg.grad.assign(pg.values.size(), 0.0);
          for (int64_t j = 0; j < c; ++j) pg.grad[j] += sum_dyx[j];
        }
        if (pb.requires_grad) {
          if (pb.grad.empty()) pb.grad.assign(pb.values.size(), 0.0);
          for (int64_t j = 0; j < c; ++j) pb.grad[j] += sum_dy[j];
        }
        if (px.requires_grad) {
          if (px.grad.empty()) px.grad.assign(px.values.size(), 0.0);
          if (training) {
            const double invm = 1.0 / static_cast<double>(m);
            for (int64_t i = 0; i < n; ++i)
              for (int64_t j = 0; j < c; ++j) {
                const double* g = self.grad.data() + (i * c + j) * hw;
                const double* xh = xhat.data() + (i * c + j) * hw;
                double* gx = px.grad.data() + (i * c + j) * hw;
                const double a = gammav[j] * inv_std[j];
                for (int64_t k = 0; k < hw; ++k)
                  gx[k] += a * (g[k] - invm * sum_dy[j] -
                                invm * xh[k] * sum_dyx[j]);
              }
          } else {
            for (int64_t i = 0; i < n; ++i)
              for (int64_t j = 0; j < c; ++j) {
                const double* g = self.grad.data() + (i * c + j) * hw;
                double* gx = px.grad.data() + (i * c + j) * hw;
                const double a = gammav[j] * inv_std[j];
                for (int64_t k = 0; k < hw; ++k) gx[k] += a * g[k];
              }
          }
        }
      });
}

Tensor pool(const Tensor& x, PoolKind kind, int64_t k, int64_t stride) {
  if (x.ndim() != 4)
    throw ShapeError("pool input must be [N,C,H,W], got " +
                     shape_str(x.shape()));
  if (k < 1 || stride < 1) throw ValueError("pool k and stride must be >= 1");
  kernels::PoolDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k, stride};
  if (d.h < k || d.w < k)
    throw ShapeError("pool window " + std::to_string(k) +
                     " exceeds input extent " + shape_str(x.shape()));
  const size_t osize = static_cast<size_t>(d.n * d.c * d.ho() * d.wo());
  std::vector<double> out(osize);
  if (kind == PoolKind::max) {
    auto argmax = std::make_shared<std::vector<int64_t>>(osize);
    kernels::maxpool_fwd(x.data(), out.data(), argmax->data(), d);
    return Tensor::node({d.n, d.c, d.ho(), d.wo()}, std::move(out), {x},
                        [d, argmax](Tensor::Impl& self) {
                          auto& px = *self.parents[0];
                          if (!px.requires_grad) return;
                          if (px.grad.empty())
                            px.grad.assign(px.values.size(), 0.0);
                          kernels::maxpool_bwd(self.grad.data(),
                                               argmax->data(),
                                               px.grad.data(), d);
                        });
  }
  kernels::avgpool_fwd(x.data(), out.data(), d);
  return Tensor::node({d.n, d.c, d.ho(), d.wo()}, std::move(out), {x},
                      [d](Tensor::Impl& self) {
                        auto& px = *self.parents[0];
                        if (!px.requires_grad) return;
                        if (px.grad.empty())
                          px.grad.assign(px.values.size(), 0.0);
                        kernels::avgpool_bwd(self.grad.data(), px.grad.data(),
                                             d);
                      });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 4)
    throw ShapeError("global_avg_pool input must be [N,C,H,W], got " +
                     shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(static_cast<size_t>(n * c), 0.0);
  const double inv = 1.0 / static_cast<double>(hw);
  for (int64_t i = 0; i < n * c; ++i) {
    const double* p = x.data() + i * hw;
    double acc = 0.0;
    for (int64_t k = 0; k < hw; ++k) acc += p[k];
    out[i] = acc * inv;
  }
  return Tensor::node({n, c, 1, 1}, std::move(out), {x},
                      [n, c, hw, inv](Tensor::Impl& self) {
                        auto& px = *self.parents[0];
                        if (!px.requires_grad) return;
                        if (px.grad.empty())
                          px.grad.assign(px.values.size(), 0.0);
                        for (int64_t i = 0; i < n * c; ++i) {
                          double* g = px.grad.data() + i * hw;
                          const double gv = self.grad[i] * inv;
                          for (int64_t k = 0; k < hw; ++k) g[k] += gv;
                        }
                      });
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.ndim() != 2 || weight.ndim() != 2)
    throw ShapeError("dense expects [N,Din] x [Dout,Din], got " +
                     shape_str(x.shape()) + " and " +
                     shape_str(weight.shape()));
  if (x.dim(1) != weight.dim(1))
    throw ShapeError("dense input width " + std::to_string(x.dim(1)) +
                     " does not match weight fan-in " +
                     std::to_string(weight.dim(1)));
  Tensor y = matmul(x, weight, false, true);
  if (bias.defined()) y = add_row_bias(y, bias);
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  if (logits.ndim() != 2)
    throw ShapeError("softmax_cross_entropy expects [N,K] logits, got " +
                     shape_str(logits.shape()));
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(n));
  for (int v : labels)
    if (v < 0 || v >= k)
      throw ValueError("label " + std::to_string(v) + " outside [0," +
                       std::to_string(k) + ")");

  std::vector<double> softmax(static_cast<size_t>(n * k));
  double loss = 0.0;
  const double* z = logits.data();
  for (int64_t i = 0; i < n; ++i) {
    const double* row = z + i * k;
    double mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = row[j] > mx ? row[j] : mx;
    double denom = 0.0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    loss += lse - row[labels[i]];
    double* s = softmax.data() + i * k;
    for (int64_t j = 0; j < k; ++j) s[j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(n);

  std::vector<int> lab = labels;
  return Tensor::node(
      {1}, {loss}, {logits},
      [n, k, softmax = std::move(softmax), lab = std::move(lab)](
          Tensor::Impl& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.empty()) px.grad.assign(px.values.size(), 0.0);
        const double g = self.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < k; ++j)
            px.grad[i * k + j] +=
                g * (softmax[i * k + j] - (lab[i] == j ? 1.0 : 0.0));
      });
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2)
    throw ShapeError("argmax_rows expects [N,K], got " +
                     shape_str(logits.shape()));
  const int64_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * k;
    int best = 0;
    for (int64_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    out[i] = best;
  }
  return out;
}

}  // namespace icnn
