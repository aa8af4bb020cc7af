#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qdf {

enum class DType : std::uint8_t { f64, f32 };

std::string_view dtype_name(DType dtype) noexcept;
/// Accepts "f64"/"float64"/"double" and "f32"/"float32"/"float".
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype) noexcept;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

/// Dense row-major array of reals with optional gradient tracking.
///
/// A Tensor is a shared handle: copies refer to the same storage and the same
/// gradient buffer, which is what lets the autodiff tape deliver gradients
/// back to parameters held elsewhere. Use `detach()` for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);

  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            DType dtype = DType::f64);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const;
  DType dtype() const;

  bool requires_grad() const;
  /// Marks a leaf as trainable. Non-leaf tensors inherit the flag from their inputs.
  Tensor& set_requires_grad(bool value = true);
  bool is_leaf() const;

  double item() const;
  double at(std::size_t flat_index) const;
  /// Overwrites one element in place. Only valid on leaves.
  void set(std::size_t flat_index, double value);
  std::vector<double> values() const;

  template <class T>
  std::span<const T> data() const;
  template <class T>
  std::span<T> mutable_data();

  bool has_grad() const;
  /// Copy of the accumulated gradient as a plain tensor of the same shape.
  Tensor grad() const;
  std::vector<double> grad_values() const;
  void zero_grad();

  /// Independent leaf copy of the values; no graph, no gradient.
  Tensor detach() const;
  Tensor to(DType dtype) const;

  /// Reverse-mode sweep from this scalar. Consumes the recorded graph.
  void backward() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  detail::TensorImpl& checked() const;
  std::shared_ptr<detail::TensorImpl> impl_;
};

bool grad_enabled() noexcept;

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace qdf
