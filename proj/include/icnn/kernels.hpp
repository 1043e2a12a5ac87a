#pragma once

#include <cstdint>

// Raw array kernels for the hot loops. Each kernel exists twice: a plain
// serial version under kernels::ref and an OpenMP version under
// kernels::par. The two are kept line-for-line identical in their inner
// accumulation order, so results match bitwise for any thread count; the
// test suite enforces this. The unprefixed functions dispatch on
// parallel_enabled().
//
// Conventions: forward kernels overwrite their output; backward kernels
// accumulate (callers zero the buffers). Layouts are row-major NCHW,
// weights [Cout,Cin,kh,kw], depthwise weights [C,kh,kw].

namespace icnn::kernels {

void set_parallel(bool on);
bool parallel_enabled();

struct Conv2dDims {
  int64_t n, cin, h, w;     // input
  int64_t cout, kh, kw;     // filter
  int64_t stride, pad;      // symmetric
  int64_t ho() const { return (h + 2 * pad - kh) / stride + 1; }
  int64_t wo() const { return (w + 2 * pad - kw) / stride + 1; }
};

struct PoolDims {
  int64_t n, c, h, w;
  int64_t k, stride;
  int64_t ho() const { return (h - k) / stride + 1; }
  int64_t wo() const { return (w - k) / stride + 1; }
};

#define ICNN_KERNEL_DECLS                                                    \
  void matmul(const double* a, const double* b, double* c, int64_t m,        \
              int64_t n, int64_t k, bool trans_a, bool trans_b,              \
              bool accumulate);                                              \
  void conv2d_fwd(const double* in, const double* w, const double* bias,     \
                  double* out, const Conv2dDims& d);                         \
  void conv2d_bwd_input(const double* gout, const double* w, double* gin,    \
                        const Conv2dDims& d);                                \
  void conv2d_bwd_weight(const double* gout, const double* in, double* gw,   \
                         const Conv2dDims& d);                               \
  void conv2d_bwd_bias(const double* gout, double* gbias,                    \
                       const Conv2dDims& d);                                 \
  void depthwise_fwd(const double* in, const double* w, double* out,         \
                     const Conv2dDims& d);                                   \
  void depthwise_bwd_input(const double* gout, const double* w, double* gin, \
                           const Conv2dDims& d);                             \
  void depthwise_bwd_weight(const double* gout, const double* in,            \
                            double* gw, const Conv2dDims& d);                \
  void maxpool_fwd(const double* in, double* out, int64_t* argmax,           \
                   const PoolDims& d);                                       \
  void maxpool_bwd(const double* gout, const int64_t* argmax, double* gin,   \
                   const PoolDims& d);                                       \
  void avgpool_fwd(const double* in, double* out, const PoolDims& d);        \
  void avgpool_bwd(const double* gout, double* gin, const PoolDims& d);

namespace ref {
ICNN_KERNEL_DECLS
}
namespace par {
ICNN_KERNEL_DECLS
}

ICNN_KERNEL_DECLS

#undef ICNN_KERNEL_DECLS

}  // namespace icnn::kernels
