#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "qdf/tensor/ops.hpp"
#include "tensor_impl.hpp"

namespace qdf {

using detail::dispatch;
using detail::grad_of;
using detail::grad_slot;
using detail::TensorImpl;
using detail::values_of;
using detail::values_of_mut;

namespace {

using Index = std::ptrdiff_t;

// Output positions o in [lo, hi) with 0 <= o*stride + offset < in_extent.
struct Range {
  Index lo = 0, hi = 0;
};

Range valid_outputs(Index in_extent, Index out_extent, Index offset, Index stride) {
  Range r;
  r.lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const Index upper = in_extent - offset;
  r.hi = upper <= 0 ? 0 : std::min<Index>((upper + stride - 1) / stride, out_extent);
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

void require_rank4(const Tensor& x, const char* op) {
  detail::require_defined(x, op);
  if (x.dim() != 4) {
    throw DimensionError(std::string(op) + ": expected [B x C x H x W], got " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank4(x, "conv2d");
  detail::require_defined(weight, "conv2d");
  detail::require_defined(bias, "conv2d");
  detail::require_same_dtype(x, weight, "conv2d");
  detail::require_same_dtype(x, bias, "conv2d");
  if (stride == 0) throw DimensionError("conv2d: stride must be >= 1");
  const std::size_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  if (weight.dim() != 4 || weight.extent(1) != C) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
  }
  const std::size_t F = weight.extent(0), KH = weight.extent(2), KW = weight.extent(3);
  if (bias.shape() != Shape{F}) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " expected [" +
                         std::to_string(F) + "]");
  }
  if (KH > H + 2 * pad || KW > W + 2 * pad) {
    throw DimensionError("conv2d: kernel " + shape_str(weight.shape()) +
                         " larger than padded input " + shape_str(x.shape()) + " with pad " +
                         std::to_string(pad));
  }
  const std::size_t HO = (H + 2 * pad - KH) / stride + 1;
  const std::size_t WO = (W + 2 * pad - KW) / stride + 1;

  // Precomputed valid output ranges per kernel row/column offset.
  auto rows = std::make_shared<std::vector<Range>>(KH);
  auto cols = std::make_shared<std::vector<Range>>(KW);
  const Index s = static_cast<Index>(stride);
  const Index p = static_cast<Index>(pad);
  for (std::size_t ky = 0; ky < KH; ++ky)
    (*rows)[ky] = valid_outputs(static_cast<Index>(H), static_cast<Index>(HO),
                                static_cast<Index>(ky) - p, s);
  for (std::size_t kx = 0; kx < KW; ++kx)
    (*cols)[kx] = valid_outputs(static_cast<Index>(W), static_cast<Index>(WO),
                                static_cast<Index>(kx) - p, s);

  Tensor out = detail::empty({B, F, HO, WO}, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xv = values_of<T>(x);
    auto wv = values_of<T>(weight);
    auto bv = values_of<T>(bias);
    auto ov = values_of_mut<T>(out);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t f = 0; f < F; ++f) {
        T* o = ov.data() + (b * F + f) * HO * WO;
        std::fill(o, o + HO * WO, bv[f]);
        for (std::size_t c = 0; c < C; ++c) {
          const T* in = xv.data() + (b * C + c) * H * W;
          const T* k = wv.data() + (f * C + c) * KH * KW;
          for (std::size_t ky = 0; ky < KH; ++ky) {
            const Range ry = (*rows)[ky];
            for (std::size_t kx = 0; kx < KW; ++kx) {
              const Range rx = (*cols)[kx];
              const T w = k[ky * KW + kx];
              const Index xoff = static_cast<Index>(kx) - p;
              for (Index oy = ry.lo; oy < ry.hi; ++oy) {
                const T* irow = in + (oy * s + static_cast<Index>(ky) - p) * static_cast<Index>(W);
                T* orow = o + oy * static_cast<Index>(WO);
                if (s == 1) {
                  const T* src = irow + xoff;
                  for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * src[ox];
                } else {
                  for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * irow[ox * s + xoff];
                }
              }
            }
          }
        }
      }
    }
  });
  detail::check_finite(out, "conv2d");

  detail::record(out, "conv2d", {x, weight, bias},
                 [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), rows, cols, B, C, H, W, F,
                  KH, KW, HO, WO, s, p](TensorImpl& o) {
    dispatch(detail::buffer_dtype(o.data), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& xv = detail::vec<T>(xi->data);
      const auto& wv = detail::vec<T>(wi->data);
      if (bi->requires_grad) {
        auto db = grad_slot<T>(*bi);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t f = 0; f < F; ++f) {
            const T* gp = g.data() + (b * F + f) * HO * WO;
            T acc = 0;
            for (std::size_t i = 0; i < HO * WO; ++i) acc += gp[i];
            db[f] += acc;
          }
      }
      const bool want_x = xi->requires_grad;
      const bool want_w = wi->requires_grad;
      if (!want_x && !want_w) return;
      T* dx = want_x ? grad_slot<T>(*xi).data() : nullptr;
      T* dw = want_w ? grad_slot<T>(*wi).data() : nullptr;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t f = 0; f < F; ++f) {
          const T* gp = g.data() + (b * F + f) * HO * WO;
          for (std::size_t c = 0; c < C; ++c) {
            const T* in = xv.data() + (b * C + c) * H * W;
            T* din = want_x ? dx + (b * C + c) * H * W : nullptr;
            const T* k = wv.data() + (f * C + c) * KH * KW;
            T* dk = want_w ? dw + (f * C + c) * KH * KW : nullptr;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const Range ry = (*rows)[ky];
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const Range rx = (*cols)[kx];
                const T w = k[ky * KW + kx];
                const Index xoff = static_cast<Index>(kx) - p;
                T wacc = 0;
                for (Index oy = ry.lo; oy < ry.hi; ++oy) {
                  const Index iy = oy * s + static_cast<Index>(ky) - p;
                  const T* grow = gp + oy * static_cast<Index>(WO);
                  const Index base = iy * static_cast<Index>(W);
                  if (s == 1) {
                    if (want_x) {
                      T* drow = din + base + xoff;
                      for (Index ox = rx.lo; ox < rx.hi; ++ox) drow[ox] += w * grow[ox];
                    }
                    if (want_w && rx.hi > rx.lo) {
                      wacc += kernels::dot(in + base + xoff + rx.lo, grow + rx.lo,
                                           static_cast<std::size_t>(rx.hi - rx.lo));
                    }
                  } else {
                    for (Index ox = rx.lo; ox < rx.hi; ++ox) {
                      const Index ix = base + ox * s + xoff;
                      if (want_x) din[ix] += w * grow[ox];
                      if (want_w) wacc += in[ix] * grow[ox];
                    }
                  }
                }
                if (want_w) dk[ky * KW + kx] += wacc;
              }
            }
          }
        }
      }
    });
  });
  return out;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                   const BatchNormOptions& options) {
  require_rank4(x, "batchnorm2d");
  const std::size_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &state.running_mean,
                                                             &state.running_var}) {
    detail::require_defined(*t, "batchnorm2d");
    detail::require_same_dtype(x, *t, "batchnorm2d");
    if (t->shape() != Shape{C}) {
      throw DimensionError("batchnorm2d: per-channel tensor " + shape_str(t->shape()) +
                           " does not match " + std::to_string(C) + " channels");
    }
  }
  const std::size_t count = B * HW;
  if (options.training && count < 2) {
    throw DimensionError("batchnorm2d: training mode needs at least 2 values per channel, got " +
                         std::to_string(count));
  }

  Tensor out = detail::empty(x.shape(), x.dtype());
  auto xhat = std::make_shared<detail::Buffer>(detail::make_buffer(x.dtype(), x.numel()));
  auto inv_std = std::make_shared<detail::Buffer>(detail::make_buffer(x.dtype(), C));
  dispatch(x.dtype(), [&]<class T>() {
    auto xv = values_of<T>(x);
    auto gm = values_of<T>(gamma);
    auto bt = values_of<T>(beta);
    auto o = values_of_mut<T>(out);
    auto rm = values_of_mut<T>(state.running_mean);
    auto rv = values_of_mut<T>(state.running_var);
    auto& xh = detail::vec<T>(*xhat);
    auto& is = detail::vec<T>(*inv_std);
    const T eps = static_cast<T>(options.eps);
    for (std::size_t c = 0; c < C; ++c) {
      T mu, var;
      if (options.training) {
        T acc = 0;
        for (std::size_t b = 0; b < B; ++b) {
          const T* p = xv.data() + (b * C + c) * HW;
          for (std::size_t i = 0; i < HW; ++i) acc += p[i];
        }
        mu = acc / static_cast<T>(count);
        T sq = 0;
        for (std::size_t b = 0; b < B; ++b) {
          const T* p = xv.data() + (b * C + c) * HW;
          for (std::size_t i = 0; i < HW; ++i) sq += (p[i] - mu) * (p[i] - mu);
        }
        var = sq / static_cast<T>(count);
        // Running variance tracks the unbiased estimate.
        const T m = static_cast<T>(options.momentum);
        const T unbiased = sq / static_cast<T>(count - 1);
        rm[c] = (T(1) - m) * rm[c] + m * mu;
        rv[c] = (T(1) - m) * rv[c] + m * unbiased;
      } else {
        mu = rm[c];
        var = rv[c];
      }
      if (!(var + eps > T(0))) {
        throw NumericError("batchnorm2d: zero variance in channel " + std::to_string(c) +
                           " with eps=" + std::to_string(options.eps));
      }
      const T inv = T(1) / std::sqrt(var + eps);
      is[c] = inv;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t off = (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          const T h = (xv[off + i] - mu) * inv;
          xh[off + i] = h;
          o[off + i] = gm[c] * h + bt[c];
        }
      }
    }
  });
  detail::check_finite(out, "batchnorm2d");

  const bool training = options.training;
  detail::record(out, "batchnorm2d", {x, gamma, beta},
                 [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), xhat, inv_std, B, C, HW,
                  count, training](TensorImpl& o) {
    dispatch(detail::buffer_dtype(o.data), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& xh = detail::vec<T>(*xhat);
      const auto& is = detail::vec<T>(*inv_std);
      const auto& gm = detail::vec<T>(gi->data);
      for (std::size_t c = 0; c < C; ++c) {
        T sum_g = 0, sum_g_h = 0;
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t off = (b * C + c) * HW;
          for (std::size_t i = 0; i < HW; ++i) {
            sum_g += g[off + i];
            sum_g_h += g[off + i] * xh[off + i];
          }
        }
        if (gi->requires_grad) grad_slot<T>(*gi)[c] += sum_g_h;
        if (bi->requires_grad) grad_slot<T>(*bi)[c] += sum_g;
        if (!xi->requires_grad) continue;
        auto dx = grad_slot<T>(*xi);
        const T scale = gm[c] * is[c];
        const T n = static_cast<T>(count);
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t off = (b * C + c) * HW;
          for (std::size_t i = 0; i < HW; ++i) {
            if (training) {
              dx[off + i] += scale / n * (n * g[off + i] - sum_g - xh[off + i] * sum_g_h);
            } else {
              dx[off + i] += scale * g[off + i];
            }
          }
        }
      }
    });
  });
  return out;
}

Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  require_rank4(x, "maxpool2d");
  const std::size_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  if (kernel == 0 || stride == 0) throw DimensionError("maxpool2d: kernel and stride must be >= 1");
  if (kernel > H || kernel > W) {
    throw DimensionError("maxpool2d: window " + std::to_string(kernel) + " larger than input " +
                         shape_str(x.shape()));
  }
  const std::size_t HO = (H - kernel) / stride + 1, WO = (W - kernel) / stride + 1;
  Tensor out = detail::empty({B, C, HO, WO}, x.dtype());
  auto argmax = std::make_shared<std::vector<std::size_t>>(B * C * HO * WO);
  dispatch(x.dtype(), [&]<class T>() {
    auto xv = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    std::size_t oi = 0;
    for (std::size_t plane = 0; plane < B * C; ++plane) {
      const std::size_t base = plane * H * W;
      for (std::size_t oy = 0; oy < HO; ++oy)
        for (std::size_t ox = 0; ox < WO; ++ox, ++oi) {
          std::size_t best = base + oy * stride * W + ox * stride;
          T bv = xv[best];
          for (std::size_t ky = 0; ky < kernel; ++ky)
            for (std::size_t kx = 0; kx < kernel; ++kx) {
              const std::size_t idx = base + (oy * stride + ky) * W + ox * stride + kx;
              if (xv[idx] > bv) {
                bv = xv[idx];
                best = idx;
              }
            }
          o[oi] = bv;
          (*argmax)[oi] = best;
        }
    }
  });
  detail::check_finite(out, "maxpool2d");
  detail::record(out, "maxpool2d", {x}, [xi = x.impl(), argmax](TensorImpl& o) {
    dispatch(detail::buffer_dtype(o.data), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) d[(*argmax)[i]] += g[i];
    });
  });
  return out;
}

Tensor global_avgpool(const Tensor& x) {
  require_rank4(x, "global_avgpool");
  const std::size_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
  Tensor out = detail::empty({B, C}, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xv = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t plane = 0; plane < B * C; ++plane) {
      T acc = 0;
      for (std::size_t i = 0; i < HW; ++i) acc += xv[plane * HW + i];
      o[plane] = acc / static_cast<T>(HW);
    }
  });
  detail::check_finite(out, "global_avgpool");
  detail::record(out, "global_avgpool", {x}, [xi = x.impl(), HW](TensorImpl& o) {
    dispatch(detail::buffer_dtype(o.data), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      const T inv = T(1) / static_cast<T>(HW);
      for (std::size_t plane = 0; plane < g.size(); ++plane)
        for (std::size_t i = 0; i < HW; ++i) d[plane * HW + i] += g[plane] * inv;
    });
  });
  return out;
}

}  // namespace qdf
