#pragma once

// Internal tensor representation shared by the op kernels. Not installed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qdf/errors.hpp"
#include "qdf/tensor/tensor.hpp"

namespace qdf::detail {

using Buffer = std::variant<std::vector<double>, std::vector<float>>;

struct Node;

struct TensorImpl {
  Shape shape;
  Buffer data;
  bool requires_grad = false;
  std::optional<Buffer> grad;
  std::shared_ptr<Node> node;  // null for leaves
};

struct Node {
  std::uint64_t seq = 0;
  std::string op;
  std::weak_ptr<TensorImpl> output;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl& out)> backward;
  bool consumed = false;
};

inline DType buffer_dtype(const Buffer& b) {
  return std::holds_alternative<std::vector<double>>(b) ? DType::f64 : DType::f32;
}

inline Buffer make_buffer(DType dtype, std::size_t n) {
  if (dtype == DType::f64) return std::vector<double>(n, 0.0);
  return std::vector<float>(n, 0.0f);
}

template <class T>
std::vector<T>& vec(Buffer& b) {
  return std::get<std::vector<T>>(b);
}
template <class T>
const std::vector<T>& vec(const Buffer& b) {
  return std::get<std::vector<T>>(b);
}

/// Calls `f.template operator()<T>()` with T matching the dtype.
template <class F>
decltype(auto) dispatch(DType dtype, F&& f) {
  if (dtype == DType::f64) return f.template operator()<double>();
  return f.template operator()<float>();
}

inline std::shared_ptr<TensorImpl> new_impl(Shape shape, DType dtype) {
  auto impl = std::make_shared<TensorImpl>();
  const std::size_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data = make_buffer(dtype, n);
  return impl;
}

inline Tensor empty(Shape shape, DType dtype) { return Tensor(new_impl(std::move(shape), dtype)); }

template <class T>
std::span<const T> values_of(const Tensor& t) {
  return vec<T>(t.impl()->data);
}
template <class T>
std::span<T> values_of_mut(const Tensor& t) {
  return vec<T>(t.impl()->data);
}
template <class T>
std::span<const T> grad_of(const TensorImpl& t) {
  return vec<T>(*t.grad);
}

/// Adds `g` into the gradient buffer of `t`, allocating zeros first if needed.
template <class T>
void accumulate(TensorImpl& t, std::span<const T> g) {
  if (!t.grad) t.grad = make_buffer(buffer_dtype(t.data), g.size());
  auto& dst = vec<T>(*t.grad);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

/// Returns a writable gradient buffer for `t`, zero-initialized on first use.
template <class T>
std::span<T> grad_slot(TensorImpl& t) {
  if (!t.grad) t.grad = make_buffer(buffer_dtype(t.data), shape_numel(t.shape));
  return vec<T>(*t.grad);
}

bool needs_grad(std::initializer_list<const Tensor*> inputs);

/// Records `out` as produced by `op` from `inputs` when any input requires grad
/// and recording is enabled. `backward` receives the output impl with its grad set.
void record(Tensor& out, std::string_view op, std::vector<Tensor> inputs,
            std::function<void(TensorImpl& out)> backward);

/// Throws NumericError naming `op` if any element of `t` is not finite.
void check_finite(const Tensor& t, std::string_view op);

void require_same_dtype(const Tensor& a, const Tensor& b, std::string_view op);
void require_defined(const Tensor& t, std::string_view op);

}  // namespace qdf::detail
