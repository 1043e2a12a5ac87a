#include "icnn/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace icnn::kernels {

namespace {
bool initial_parallel() {
  const char* env = std::getenv("ICNN_SERIAL");
  return !(env && env[0] == '1');
}
std::atomic<bool> g_parallel{initial_parallel()};
}  // namespace

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

#define ICNN_DISPATCH(fn, ...)       \
  do {                               \
    if (parallel_enabled())          \
      par::fn(__VA_ARGS__);          \
    else                             \
      ref::fn(__VA_ARGS__);          \
  } while (0)

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t n,
            int64_t k, bool trans_a, bool trans_b, bool accumulate) {
  ICNN_DISPATCH(matmul, a, b, c, m, n, k, trans_a, trans_b, accumulate);
}

void conv2d_fwd(const double* in, const double* w, const double* bias,
                double* out, const Conv2dDims& d) {
  ICNN_DISPATCH(conv2d_fwd, in, w, bias, out, d);
}

void conv2d_bwd_input(const double* gout, const double* w, double* gin,
                      const Conv2dDims& d) {
  ICNN_DISPATCH(conv2d_bwd_input, gout, w, gin, d);
}

void conv2d_bwd_weight(const double* gout, const double* in, double* gw,
                       const Conv2dDims& d) {
  ICNN_DISPATCH(conv2d_bwd_weight, gout, in, gw, d);
}

void conv2d_bwd_bias(const double* gout, double* gbias, const Conv2dDims& d) {
  ICNN_DISPATCH(conv2d_bwd_bias, gout, gbias, d);
}

void depthwise_fwd(const double* in, const double* w, double* out,
                   const Conv2dDims& d) {
  ICNN_DISPATCH(depthwise_fwd, in, w, out, d);
}

void depthwise_bwd_input(const double* gout, const double* w, double* gin,
                         const Conv2dDims& d) {
  ICNN_DISPATCH(depthwise_bwd_input, gout, w, gin, d);
}

void depthwise_bwd_weight(const double* gout, const double* in, double* gw,
                          const Conv2dDims& d) {
  ICNN_DISPATCH(depthwise_bwd_weight, gout, in, gw, d);
}

void maxpool_fwd(const double* in, double* out, int64_t* argmax,
                 const PoolDims& d) {
  ICNN_DISPATCH(maxpool_fwd, in, out, argmax, d);
}

void maxpool_bwd(const double* gout, const int64_t* argmax, double* gin,
                 const PoolDims& d) {
  ICNN_DISPATCH(maxpool_bwd, gout, argmax, gin, d);
}

void avgpool_fwd(const double* in, double* out, const PoolDims& d) {
  ICNN_DISPATCH(avgpool_fwd, in, out, d);
}

void avgpool_bwd(const double* gout, double* gin, const PoolDims& d) {
  ICNN_DISPATCH(avgpool_bwd, gout, gin, d);
}

#undef ICNN_DISPATCH

}  // namespace icnn::kernels
