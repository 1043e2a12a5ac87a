#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

// Convolution parameters. Weight layout [C_out, C_in, k, k]; bias optional
// (layers feeding a batch norm drop it). Padding is symmetric zero padding.
struct ConvParams {
  Tensor weight;
  Tensor bias;  // undefined when absent
  int64_t stride = 1;
  int64_t padding = 0;
};

struct BatchNormState {
  Tensor gamma;  // [C]
  Tensor beta;   // [C]
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  bool training = true;

  static BatchNormState make(int64_t channels);
};

enum class PoolKind { max, avg };

Tensor conv2d(const Tensor& x, const ConvParams& p);
Tensor depthwise_conv2d(const Tensor& x, const Tensor& weight, int64_t stride,
                        int64_t padding);

// Train mode normalizes with batch statistics (biased variance) and updates
// the running stats in place; eval mode is the fixed per-channel affine map
// from the running stats.
Tensor batch_norm(const Tensor& x, BatchNormState& state);

Tensor pool(const Tensor& x, PoolKind kind, int64_t k, int64_t stride);
Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C,1,1]

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label]; stabilized by row-max
// subtraction.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

// Row-wise argmax of [N,K] values.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace icnn
