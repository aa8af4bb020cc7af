#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qdf/tensor/ops.hpp"
#include "tensor_impl.hpp"

namespace qdf {

using detail::accumulate;
using detail::dispatch;
using detail::empty;
using detail::grad_of;
using detail::grad_slot;
using detail::record;
using detail::TensorImpl;
using detail::values_of;
using detail::values_of_mut;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  detail::require_defined(a, op);
  detail::require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  detail::require_same_dtype(a, b, op);
}

DType dtype_of(const TensorImpl& t) { return detail::buffer_dtype(t.data); }

// Splits `shape` around `axis` into (outer, axis extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.dim()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_str(x.shape()));
  }
}

}  // namespace

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = empty(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto x = values_of<T>(a);
    auto y = values_of<T>(b);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  });
  detail::check_finite(out, "add");
  record(out, "add", {a, b}, [ai = a.impl(), bi = b.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      if (ai->requires_grad) accumulate<T>(*ai, g);
      if (bi->requires_grad) accumulate<T>(*bi, g);
    });
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = empty(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto x = values_of<T>(a);
    auto y = values_of<T>(b);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  });
  detail::check_finite(out, "sub");
  record(out, "sub", {a, b}, [ai = a.impl(), bi = b.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      if (ai->requires_grad) accumulate<T>(*ai, g);
      if (bi->requires_grad) {
        auto d = grad_slot<T>(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
      }
    });
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = empty(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto x = values_of<T>(a);
    auto y = values_of<T>(b);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  });
  detail::check_finite(out, "mul");
  record(out, "mul", {a, b}, [ai = a.impl(), bi = b.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& x = detail::vec<T>(ai->data);
      const auto& y = detail::vec<T>(bi->data);
      if (ai->requires_grad) {
        auto d = grad_slot<T>(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i];
      }
      if (bi->requires_grad) {
        auto d = grad_slot<T>(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * x[i];
      }
    });
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  detail::require_defined(x, "scale");
  Tensor out = empty(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[i] * f;
  });
  detail::check_finite(out, "scale");
  record(out, "scale", {x}, [xi = x.impl(), factor](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      const T f = static_cast<T>(factor);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * f;
    });
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  detail::require_defined(x, "add_bias");
  detail::require_defined(bias, "add_bias");
  detail::require_same_dtype(x, bias, "add_bias");
  const std::size_t c = x.shape().back();
  if (bias.dim() != 1 || bias.extent(0) != c) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match last axis of " +
                         shape_str(x.shape()));
  }
  Tensor out = empty(x.shape(), x.dtype());
  const std::size_t rows = x.numel() / c;
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto b = values_of<T>(bias);
    auto o = values_of_mut<T>(out);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) o[r * c + j] = v[r * c + j] + b[j];
  });
  detail::check_finite(out, "add_bias");
  record(out, "add_bias", {x, bias}, [xi = x.impl(), bi = bias.impl(), rows, c](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      if (xi->requires_grad) accumulate<T>(*xi, g);
      if (bi->requires_grad) {
        auto d = grad_slot<T>(*bi);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) d[j] += g[r * c + j];
      }
    });
  });
  return out;
}

Tensor map_elementwise(const Tensor& x, std::string name, std::function<double(double)> f,
                       std::function<double(double, double)> dfdx) {
  detail::require_defined(x, "map_elementwise");
  Tensor out = empty(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<T>(f(v[i]));
  });
  detail::check_finite(out, name);
  record(out, name, {x}, [xi = x.impl(), dfdx = std::move(dfdx)](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& v = detail::vec<T>(xi->data);
      const auto& y = detail::vec<T>(o.data);
      auto d = grad_slot<T>(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * static_cast<T>(dfdx(v[i], y[i]));
    });
  });
  return out;
}

// --- activations ------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
  detail::require_defined(x, "sigmoid");
  Tensor out = empty(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = T(1) / (T(1) + std::exp(-v[i]));
  });
  detail::check_finite(out, "sigmoid");
  record(out, "sigmoid", {x}, [xi = x.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& y = detail::vec<T>(o.data);
      auto d = grad_slot<T>(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  });
  return out;
}

Tensor relu(const Tensor& x) {
  detail::require_defined(x, "relu");
  Tensor out = empty(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[i] > T(0) ? v[i] : T(0);
  });
  detail::check_finite(out, "relu");
  record(out, "relu", {x}, [xi = x.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& v = detail::vec<T>(xi->data);
      auto d = grad_slot<T>(*xi);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (v[i] > T(0)) d[i] += g[i];
    });
  });
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  detail::require_defined(x, "softmax");
  require_axis(x, axis, "softmax");
  const AxisSplit s = split_at(x.shape(), axis);
  Tensor out = empty(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t a = 0; a < s.outer; ++a) {
      for (std::size_t c = 0; c < s.inner; ++c) {
        const std::size_t base = a * s.extent * s.inner + c;
        T m = v[base];
        for (std::size_t k = 1; k < s.extent; ++k) m = std::max(m, v[base + k * s.inner]);
        T total = 0;
        for (std::size_t k = 0; k < s.extent; ++k) {
          const T e = std::exp(v[base + k * s.inner] - m);
          o[base + k * s.inner] = e;
          total += e;
        }
        for (std::size_t k = 0; k < s.extent; ++k) o[base + k * s.inner] /= total;
      }
    }
  });
  detail::check_finite(out, "softmax");
  record(out, "softmax", {x}, [xi = x.impl(), s](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& y = detail::vec<T>(o.data);
      auto d = grad_slot<T>(*xi);
      for (std::size_t a = 0; a < s.outer; ++a) {
        for (std::size_t c = 0; c < s.inner; ++c) {
          const std::size_t base = a * s.extent * s.inner + c;
          T dotgy = 0;
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t i = base + k * s.inner;
            dotgy += g[i] * y[i];
          }
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t i = base + k * s.inner;
            d[i] += y[i] * (g[i] - dotgy);
          }
        }
      }
    });
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  detail::require_defined(x, "layer_norm");
  detail::require_same_dtype(x, gamma, "layer_norm");
  detail::require_same_dtype(x, beta, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw DimensionError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match last axis of " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  Tensor out = empty(x.shape(), x.dtype());
  // Normalized values and per-row inverse std are kept for the backward pass.
  auto xhat = std::make_shared<detail::Buffer>(detail::make_buffer(x.dtype(), x.numel()));
  auto inv_std = std::make_shared<detail::Buffer>(detail::make_buffer(x.dtype(), rows));
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto gm = values_of<T>(gamma);
    auto bt = values_of<T>(beta);
    auto o = values_of_mut<T>(out);
    auto& xh = detail::vec<T>(*xhat);
    auto& is = detail::vec<T>(*inv_std);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = v.data() + r * d;
      T mu = 0;
      for (std::size_t j = 0; j < d; ++j) mu += row[j];
      mu /= static_cast<T>(d);
      T var = 0;
      for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      is[r] = inv;
      for (std::size_t j = 0; j < d; ++j) {
        const T h = (row[j] - mu) * inv;
        xh[r * d + j] = h;
        o[r * d + j] = gm[j] * h + bt[j];
      }
    }
  });
  detail::check_finite(out, "layer_norm");
  record(out, "layer_norm", {x, gamma, beta},
         [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), xhat, inv_std, rows,
          d](TensorImpl& o) {
           dispatch(dtype_of(o), [&]<class T>() {
             auto g = grad_of<T>(o);
             const auto& xh = detail::vec<T>(*xhat);
             const auto& is = detail::vec<T>(*inv_std);
             const auto& gm = detail::vec<T>(gi->data);
             if (gi->requires_grad) {
               auto dg = grad_slot<T>(*gi);
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < d; ++j) dg[j] += g[r * d + j] * xh[r * d + j];
             }
             if (bi->requires_grad) {
               auto db = grad_slot<T>(*bi);
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < d; ++j) db[j] += g[r * d + j];
             }
             if (xi->requires_grad) {
               auto dx = grad_slot<T>(*xi);
               const T n = static_cast<T>(d);
               for (std::size_t r = 0; r < rows; ++r) {
                 T sum_dh = 0, sum_dh_h = 0;
                 for (std::size_t j = 0; j < d; ++j) {
                   const T dh = g[r * d + j] * gm[j];
                   sum_dh += dh;
                   sum_dh_h += dh * xh[r * d + j];
                 }
                 for (std::size_t j = 0; j < d; ++j) {
                   const T dh = g[r * d + j] * gm[j];
                   dx[r * d + j] += is[r] / n * (n * dh - sum_dh - xh[r * d + j] * sum_dh_h);
                 }
               }
             }
           });
         });
  return out;
}

// --- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  detail::require_defined(x, "sum");
  Tensor out = empty({1}, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    T s = 0;
    for (auto e : v) s += e;
    values_of_mut<T>(out)[0] = s;
  });
  detail::check_finite(out, "sum");
  record(out, "sum", {x}, [xi = x.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      const T g = grad_of<T>(o)[0];
      auto d = grad_slot<T>(*xi);
      for (auto& e : d) e += g;
    });
  });
  return out;
}

Tensor mean(const Tensor& x) {
  detail::require_defined(x, "mean");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, std::size_t axis) {
  detail::require_defined(x, "mean");
  require_axis(x, axis, "mean");
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor out = empty(out_shape, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t c = 0; c < s.inner; ++c) {
        T acc = 0;
        for (std::size_t k = 0; k < s.extent; ++k) acc += v[(a * s.extent + k) * s.inner + c];
        o[a * s.inner + c] = acc / static_cast<T>(s.extent);
      }
  });
  detail::check_finite(out, "mean");
  record(out, "mean_axis", {x}, [xi = x.impl(), s](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      const T inv = T(1) / static_cast<T>(s.extent);
      for (std::size_t a = 0; a < s.outer; ++a)
        for (std::size_t k = 0; k < s.extent; ++k)
          for (std::size_t c = 0; c < s.inner; ++c)
            d[(a * s.extent + k) * s.inner + c] += g[a * s.inner + c] * inv;
    });
  });
  return out;
}

// --- shape ops --------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  detail::require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel() || shape.empty()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  for (auto e : shape)
    if (e == 0) throw DimensionError("reshape: zero extent in " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = x.impl()->data;
  Tensor out(std::move(impl));
  record(out, "reshape", {x}, [xi = x.impl()](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() { accumulate<T>(*xi, grad_of<T>(o)); });
  });
  return out;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  detail::require_defined(x, "permute");
  const std::size_t rank = x.dim();
  std::vector<bool> used(rank, false);
  if (axes.size() != rank) throw DimensionError("permute: axis list size mismatch");
  for (auto a : axes) {
    if (a >= rank || used[a]) throw DimensionError("permute: invalid axis list");
    used[a] = true;
  }
  const Shape& in_shape = x.shape();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[axes[i]];
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  // Source offset for every destination element, in destination order.
  auto src_index = std::make_shared<std::vector<std::size_t>>(x.numel());
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < x.numel(); ++flat) {
      std::size_t off = 0;
      for (std::size_t i = 0; i < rank; ++i) off += idx[i] * in_strides[axes[i]];
      (*src_index)[flat] = off;
      for (std::size_t i = rank; i-- > 0;) {
        if (++idx[i] < out_shape[i]) break;
        idx[i] = 0;
      }
    }
  }
  Tensor out = empty(out_shape, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[(*src_index)[i]];
  });
  record(out, "permute", {x}, [xi = x.impl(), src_index](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) d[(*src_index)[i]] += g[i];
    });
  });
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  detail::require_defined(x, "transpose_last2");
  if (x.dim() != 3) throw DimensionError("transpose_last2: expected rank 3, got " + shape_str(x.shape()));
  return permute(x, {0, 2, 1});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  for (const auto& p : parts) detail::require_defined(p, "concat");
  const Tensor& first = parts.front();
  require_axis(first, axis, "concat");
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    detail::require_same_dtype(first, p, "concat");
    if (p.dim() != first.dim()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < p.dim(); ++i) {
      if (i != axis && p.shape()[i] != first.shape()[i]) {
        throw DimensionError("concat: " + shape_str(p.shape()) + " incompatible with " +
                             shape_str(first.shape()) + " along axis " + std::to_string(axis));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  const AxisSplit s = split_at(out_shape, axis);
  Tensor out = empty(out_shape, first.dtype());
  std::vector<std::size_t> offsets;
  std::size_t running = 0;
  for (const auto& p : parts) {
    offsets.push_back(running);
    running += p.shape()[axis];
  }
  dispatch(first.dtype(), [&]<class T>() {
    auto o = values_of_mut<T>(out);
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      auto v = values_of<T>(parts[pi]);
      const std::size_t len = parts[pi].shape()[axis];
      for (std::size_t a = 0; a < s.outer; ++a)
        std::copy_n(v.data() + a * len * s.inner, len * s.inner,
                    o.data() + (a * s.extent + offsets[pi]) * s.inner);
    }
  });
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<std::size_t> lengths;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    lengths.push_back(p.shape()[axis]);
  }
  record(out, "concat", parts, [impls, lengths, offsets, s](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      for (std::size_t pi = 0; pi < impls.size(); ++pi) {
        if (!impls[pi]->requires_grad) continue;
        auto d = grad_slot<T>(*impls[pi]);
        const std::size_t len = lengths[pi];
        for (std::size_t a = 0; a < s.outer; ++a)
          for (std::size_t i = 0; i < len * s.inner; ++i)
            d[a * len * s.inner + i] += g[(a * s.extent + offsets[pi]) * s.inner + i];
      }
    });
  });
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  detail::require_defined(x, "slice");
  require_axis(x, axis, "slice");
  if (length == 0 || start + length > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside axis of extent " +
                         std::to_string(x.shape()[axis]));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Tensor out = empty(out_shape, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto v = values_of<T>(x);
    auto o = values_of_mut<T>(out);
    for (std::size_t a = 0; a < s.outer; ++a)
      std::copy_n(v.data() + (a * s.extent + start) * s.inner, length * s.inner,
                  o.data() + a * length * s.inner);
  });
  record(out, "slice", {x}, [xi = x.impl(), s, start, length](TensorImpl& o) {
    dispatch(dtype_of(o), [&]<class T>() {
      auto g = grad_of<T>(o);
      auto d = grad_slot<T>(*xi);
      for (std::size_t a = 0; a < s.outer; ++a)
        for (std::size_t i = 0; i < length * s.inner; ++i)
          d[(a * s.extent + start) * s.inner + i] += g[a * length * s.inner + i];
    });
  });
  return out;
}

}  // namespace qdf
