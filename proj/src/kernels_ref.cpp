#include "icnn/kernels.hpp"

// Serial reference kernels. kernels_par.cpp carries the same loop bodies
// with OpenMP pragmas on the outer loops; keep the accumulation order in
// matching functions identical so the bitwise-equality tests stay valid.

namespace icnn::kernels::ref {

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t n,
            int64_t k, bool trans_a, bool trans_b, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate)
      for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (int64_t p = 0; p < k; ++p) {
      double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (!trans_b) {
        const double* brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (int64_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

void conv2d_fwd(const double* in, const double* w, const double* bias,
                double* out, const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.cout; ++plane) {
    const int64_t img = plane / d.cout, co = plane % d.cout;
    double* o = out + plane * ho * wo;
    const double b0 = bias ? bias[co] : 0.0;
    for (int64_t i = 0; i < ho * wo; ++i) o[i] = b0;
    for (int64_t ci = 0; ci < d.cin; ++ci) {
      const double* x = in + (img * d.cin + ci) * d.h * d.w;
      const double* wk = w + (co * d.cin + ci) * d.kh * d.kw;
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          const double wv = wk[kh * d.kw + kw];
          for (int64_t oh = 0; oh < ho; ++oh) {
            const int64_t ih = oh * d.stride + kh - d.pad;
            if (ih < 0 || ih >= d.h) continue;
            const double* xrow = x + ih * d.w;
            double* orow = o + oh * wo;
            for (int64_t ow = 0; ow < wo; ++ow) {
              const int64_t iw = ow * d.stride + kw - d.pad;
              if (iw < 0 || iw >= d.w) continue;
              orow[ow] += wv * xrow[iw];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_input(const double* gout, const double* w, double* gin,
                      const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.cin; ++plane) {
    const int64_t img = plane / d.cin, ci = plane % d.cin;
    double* g = gin + plane * d.h * d.w;
    for (int64_t co = 0; co < d.cout; ++co) {
      const double* go = gout + (img * d.cout + co) * ho * wo;
      const double* wk = w + (co * d.cin + ci) * d.kh * d.kw;
      for (int64_t kh = 0; kh < d.kh; ++kh) {
        for (int64_t kw = 0; kw < d.kw; ++kw) {
          const double wv = wk[kh * d.kw + kw];
          for (int64_t oh = 0; oh < ho; ++oh) {
            const int64_t ih = oh * d.stride + kh - d.pad;
            if (ih < 0 || ih >= d.h) continue;
            double* grow = g + ih * d.w;
            const double* gorow = go + oh * wo;
            for (int64_t ow = 0; ow < wo; ++ow) {
              const int64_t iw = ow * d.stride + kw - d.pad;
              if (iw < 0 || iw >= d.w) continue;
              grow[iw] += wv * gorow[ow];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_weight(const double* gout, const double* in, double* gw,
                       const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t f = 0; f < d.cout * d.cin; ++f) {
    const int64_t co = f / d.cin, ci = f % d.cin;
    double* gk = gw + f * d.kh * d.kw;
    for (int64_t kh = 0; kh < d.kh; ++kh) {
      for (int64_t kw = 0; kw < d.kw; ++kw) {
        double acc = 0.0;
        for (int64_t img = 0; img < d.n; ++img) {
          const double* x = in + (img * d.cin + ci) * d.h * d.w;
          const double* go = gout + (img * d.cout + co) * ho * wo;
          for (int64_t oh = 0; oh < ho; ++oh) {
            const int64_t ih = oh * d.stride + kh - d.pad;
            if (ih < 0 || ih >= d.h) continue;
            const double* xrow = x + ih * d.w;
            const double* gorow = go + oh * wo;
            for (int64_t ow = 0; ow < wo; ++ow) {
              const int64_t iw = ow * d.stride + kw - d.pad;
              if (iw < 0 || iw >= d.w) continue;
              acc += xrow[iw] * gorow[ow];
            }
          }
        }
        gk[kh * d.kw + kw] += acc;
      }
    }
  }
}

void conv2d_bwd_bias(const double* gout, double* gbias, const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t co = 0; co < d.cout; ++co) {
    double acc = 0.0;
    for (int64_t img = 0; img < d.n; ++img) {
      const double* go = gout + (img * d.cout + co) * ho * wo;
      for (int64_t i = 0; i < ho * wo; ++i) acc += go[i];
    }
    gbias[co] += acc;
  }
}

void depthwise_fwd(const double* in, const double* w, double* out,
                   const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.cin; ++plane) {
    const int64_t ci = plane % d.cin;
    const double* x = in + plane * d.h * d.w;
    const double* wk = w + ci * d.kh * d.kw;
    double* o = out + plane * ho * wo;
    for (int64_t i = 0; i < ho * wo; ++i) o[i] = 0.0;
    for (int64_t kh = 0; kh < d.kh; ++kh) {
      for (int64_t kw = 0; kw < d.kw; ++kw) {
        const double wv = wk[kh * d.kw + kw];
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * d.stride + kh - d.pad;
          if (ih < 0 || ih >= d.h) continue;
          const double* xrow = x + ih * d.w;
          double* orow = o + oh * wo;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * d.stride + kw - d.pad;
            if (iw < 0 || iw >= d.w) continue;
            orow[ow] += wv * xrow[iw];
          }
        }
      }
    }
  }
}

void depthwise_bwd_input(const double* gout, const double* w, double* gin,
                         const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.cin; ++plane) {
    const int64_t ci = plane % d.cin;
    const double* go = gout + plane * ho * wo;
    const double* wk = w + ci * d.kh * d.kw;
    double* g = gin + plane * d.h * d.w;
    for (int64_t kh = 0; kh < d.kh; ++kh) {
      for (int64_t kw = 0; kw < d.kw; ++kw) {
        const double wv = wk[kh * d.kw + kw];
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * d.stride + kh - d.pad;
          if (ih < 0 || ih >= d.h) continue;
          double* grow = g + ih * d.w;
          const double* gorow = go + oh * wo;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * d.stride + kw - d.pad;
            if (iw < 0 || iw >= d.w) continue;
            grow[iw] += wv * gorow[ow];
          }
        }
      }
    }
  }
}

void depthwise_bwd_weight(const double* gout, const double* in, double* gw,
                          const Conv2dDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t ci = 0; ci < d.cin; ++ci) {
    double* gk = gw + ci * d.kh * d.kw;
    for (int64_t kh = 0; kh < d.kh; ++kh) {
      for (int64_t kw = 0; kw < d.kw; ++kw) {
        double acc = 0.0;
        for (int64_t img = 0; img < d.n; ++img) {
          const double* x = in + (img * d.cin + ci) * d.h * d.w;
          const double* go = gout + (img * d.cin + ci) * ho * wo;
          for (int64_t oh = 0; oh < ho; ++oh) {
            const int64_t ih = oh * d.stride + kh - d.pad;
            if (ih < 0 || ih >= d.h) continue;
            const double* xrow = x + ih * d.w;
            const double* gorow = go + oh * wo;
            for (int64_t ow = 0; ow < wo; ++ow) {
              const int64_t iw = ow * d.stride + kw - d.pad;
              if (iw < 0 || iw >= d.w) continue;
              acc += xrow[iw] * gorow[ow];
            }
          }
        }
        gk[kh * d.kw + kw] += acc;
      }
    }
  }
}

void maxpool_fwd(const double* in, double* out, int64_t* argmax,
                 const PoolDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.c; ++plane) {
    const double* x = in + plane * d.h * d.w;
    double* o = out + plane * ho * wo;
    int64_t* am = argmax + plane * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        int64_t best = (oh * d.stride) * d.w + ow * d.stride;
        double bv = x[best];
        for (int64_t kh = 0; kh < d.k; ++kh) {
          for (int64_t kw = 0; kw < d.k; ++kw) {
            const int64_t idx =
                (oh * d.stride + kh) * d.w + (ow * d.stride + kw);
            if (x[idx] > bv) {  // strict: first maximum wins ties
              bv = x[idx];
              best = idx;
            }
          }
        }
        o[oh * wo + ow] = bv;
        am[oh * wo + ow] = best;
      }
    }
  }
}

void maxpool_bwd(const double* gout, const int64_t* argmax, double* gin,
                 const PoolDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  for (int64_t plane = 0; plane < d.n * d.c; ++plane) {
    const double* go = gout + plane * ho * wo;
    const int64_t* am = argmax + plane * ho * wo;
    double* g = gin + plane * d.h * d.w;
    for (int64_t i = 0; i < ho * wo; ++i) g[am[i]] += go[i];
  }
}

void avgpool_fwd(const double* in, double* out, const PoolDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  const double inv = 1.0 / static_cast<double>(d.k * d.k);
  for (int64_t plane = 0; plane < d.n * d.c; ++plane) {
    const double* x = in + plane * d.h * d.w;
    double* o = out + plane * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        double acc = 0.0;
        for (int64_t kh = 0; kh < d.k; ++kh)
          for (int64_t kw = 0; kw < d.k; ++kw)
            acc += x[(oh * d.stride + kh) * d.w + (ow * d.stride + kw)];
        o[oh * wo + ow] = acc * inv;
      }
    }
  }
}

void avgpool_bwd(const double* gout, double* gin, const PoolDims& d) {
  const int64_t ho = d.ho(), wo = d.wo();
  const double inv = 1.0 / static_cast<double>(d.k * d.k);
  for (int64_t plane = 0; plane < d.n * d.c; ++plane) {
    const double* go = gout + plane * ho * wo;
    double* g = gin + plane * d.h * d.w;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        const double gv = go[oh * wo + ow] * inv;
        for (int64_t kh = 0; kh < d.k; ++kh)
          for (int64_t kw = 0; kw < d.k; ++kw)
            g[(oh * d.stride + kh) * d.w + (ow * d.stride + kw)] += gv;
      }
    }
  }
}

}  // namespace icnn::kernels::ref
