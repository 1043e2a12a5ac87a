#pragma once

#include <optional>

#include "icnn/ops.hpp"
#include "icnn/tensor.hpp"

namespace icnn {

enum class Activation { identity, relu };

// Dense collision unit: y = f(Wx + b1 + relu(Wx - w'*sum(x) + b2)).
// The gated branch adds a second affine response along the direction that
// compares the weighted sum against the plain input sum.
struct ICDenseParams {
  Tensor weight;      // [M,N]
  Tensor w_prime;     // [M]
  Tensor bias_main;   // [M], optional
  Tensor bias_inner;  // [M], optional
};

Tensor ic_dense_forward(const Tensor& x, const ICDenseParams& p, Activation f);

// Branch-selected closed form of the same unit: per element, the gate
// condition H = Wx - w'*sum(x) + b2 >= 0 picks f(2Wx - w'*sum(x) + b1 + b2),
// otherwise f(Wx + b1). Computed with independent scalar loops (no autograd,
// no shared code with ic_dense_forward); used as a cross-check oracle.
Tensor ic_dense_piecewise(const Tensor& x, const ICDenseParams& p,
                          Activation f);

// Per-channel sliding-window sum: depthwise convolution with fixed all-one
// k x k kernels. Differentiable with respect to x.
Tensor rough_feature(const Tensor& x, int64_t k, int64_t stride,
                     int64_t padding);

enum class ICConvMode { grouped, scalar };

// Convolutional collision unit: out_i = main_i + relu(main_i - contraction_i)
// where main = conv2d(x) and the contraction reduces the rough feature by
// w'. Grouped mode contracts per input channel (w_prime [C_out,C_in]);
// scalar mode multiplies the channel-summed rough feature by one w' per
// filter (w_prime [C_out]). Scalar mode is an ablation path; grouped is the
// default.
struct ICConvParams {
  ConvParams conv;
  Tensor w_prime;
  ICConvMode mode = ICConvMode::grouped;
};

Tensor ic_conv_forward(const Tensor& x, const ICConvParams& p);

// F(a,b) = a + relu(BN(a+b)); BN omitted when bn is null.
Tensor ic_combine(const Tensor& a, const Tensor& b, BatchNormState* bn);

// Channel mean broadcast to a new channel count: every output channel holds
// the mean over input channels. Used when a block's input channel count
// differs from its output channel count.
Tensor channel_mean_broadcast(const Tensor& x, int64_t out_channels);

// Residual blocks. Plain and collision variants share one parameter pack:
// combine_bn present -> block form (rough feature merged via ic_combine);
// wp1/wp2 present -> the corresponding 3x3 conv runs as a grouped
// convolutional collision unit instead of a plain conv.
struct ICBlockParams {
  ConvParams conv1;
  BatchNormState bn1;
  ConvParams conv2;
  BatchNormState bn2;
  std::optional<ConvParams> conv3;       // bottleneck only
  std::optional<BatchNormState> bn3;     // bottleneck only
  std::optional<ConvParams> shortcut;    // projection when shape changes
  std::optional<BatchNormState> combine_bn;
  Tensor wp1;  // grouped w' for conv1 (basic) when defined
  Tensor wp2;  // grouped w' for conv2 (basic & bottleneck 3x3) when defined
  int64_t stride = 1;
};

Tensor ic_basic_block(const Tensor& x, ICBlockParams& p);
Tensor ic_bottleneck_block(const Tensor& x, ICBlockParams& p);

}  // namespace icnn
