#include "qdf/tensor/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "tensor_impl.hpp"

namespace qdf {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_node_seq{0};

}  // namespace

std::string_view dtype_name(DType dtype) noexcept {
  return dtype == DType::f64 ? "f64" : "f32";
}

DType parse_dtype(std::string_view name) {
  if (name == "f64" || name == "float64" || name == "double") return DType::f64;
  if (name == "f32" || name == "float32" || name == "float") return DType::f32;
  throw ValidationError("unknown dtype '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dtype) noexcept { return dtype == DType::f64 ? 8 : 4; }

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------

namespace detail {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->defined() && t->requires_grad(); });
}

void record(Tensor& out, std::string_view op, std::vector<Tensor> inputs,
            std::function<void(TensorImpl&)> backward) {
  if (!g_grad_enabled) return;
  bool any = false;
  for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
  if (!any) return;
  auto node = std::make_shared<Node>();
  node->seq = g_node_seq.fetch_add(1, std::memory_order_relaxed);
  node->op = op;
  node->output = out.impl();
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
}

void check_finite(const Tensor& t, std::string_view op) {
  dispatch(t.dtype(), [&]<class T>() {
    const auto v = values_of<T>(t);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        throw NumericError(std::string(op) + ": non-finite value at element " +
                           std::to_string(i) + " of output " + shape_str(t.shape()));
      }
    }
  });
}

void require_same_dtype(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.dtype() != b.dtype()) {
    throw DimensionError(std::string(op) + ": dtype mismatch " +
                         std::string(dtype_name(a.dtype())) + " vs " +
                         std::string(dtype_name(b.dtype())));
  }
}

void require_defined(const Tensor& t, std::string_view op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

}  // namespace detail

// ---------------------------------------------------------------------------

using detail::TensorImpl;

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

TensorImpl& Tensor::checked() const {
  if (!impl_) throw DimensionError("use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be >= 1, got " + shape_str(shape));
  }
  if (shape.empty()) throw DimensionError("tensor needs at least one axis");
  Tensor t(detail::new_impl(std::move(shape), dtype));
  detail::dispatch(dtype, [&]<class T>() {
    auto v = detail::values_of_mut<T>(t);
    std::fill(v.begin(), v.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  Tensor t = zeros(std::move(shape), dtype);
  if (values.size() != t.numel()) {
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(t.shape()));
  }
  detail::dispatch(dtype, [&]<class T>() {
    auto v = detail::values_of_mut<T>(t);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(values[i]);
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values, DType dtype) {
  return from_values(std::move(shape), std::span<const double>(values.begin(), values.size()),
                     dtype);
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::extent(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

DType Tensor::dtype() const { return detail::buffer_dtype(checked().data); }

bool Tensor::requires_grad() const { return checked().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw GraphError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::is_leaf() const { return checked().node == nullptr; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return at(0);
}

double Tensor::at(std::size_t i) const {
  return detail::dispatch(dtype(), [&]<class T>() -> double {
    return static_cast<double>(detail::values_of<T>(*this)[i]);
  });
}

void Tensor::set(std::size_t i, double value) {
  if (!is_leaf()) throw GraphError("in-place set on a non-leaf tensor");
  if (i >= numel()) throw DimensionError("set: index out of range");
  detail::dispatch(dtype(), [&]<class T>() {
    detail::values_of_mut<T>(*this)[i] = static_cast<T>(value);
  });
}

std::vector<double> Tensor::values() const {
  return detail::dispatch(dtype(), [&]<class T>() {
    auto v = detail::values_of<T>(*this);
    return std::vector<double>(v.begin(), v.end());
  });
}

template <class T>
std::span<const T> Tensor::data() const {
  if (dtype() != (std::is_same_v<T, double> ? DType::f64 : DType::f32)) {
    throw DimensionError("data<T>(): dtype mismatch");
  }
  return detail::values_of<T>(*this);
}

template <class T>
std::span<T> Tensor::mutable_data() {
  if (dtype() != (std::is_same_v<T, double> ? DType::f64 : DType::f32)) {
    throw DimensionError("mutable_data<T>(): dtype mismatch");
  }
  return detail::values_of_mut<T>(*this);
}

template std::span<const double> Tensor::data<double>() const;
template std::span<const float> Tensor::data<float>() const;
template std::span<double> Tensor::mutable_data<double>();
template std::span<float> Tensor::mutable_data<float>();

bool Tensor::has_grad() const { return checked().grad.has_value(); }

Tensor Tensor::grad() const {
  if (!has_grad()) throw GraphError("tensor has no gradient");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = *impl_->grad;
  return Tensor(std::move(impl));
}

std::vector<double> Tensor::grad_values() const { return grad().values(); }

void Tensor::zero_grad() { checked().grad.reset(); }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = checked().shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::to(DType target) const {
  if (target == dtype()) return detach();
  Tensor out(detail::new_impl(shape(), target));
  const auto v = values();
  detail::dispatch(target, [&]<class T>() {
    auto dst = detail::values_of_mut<T>(out);
    for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<T>(v[i]);
  });
  return out;
}

void Tensor::backward() const {
  auto& root = checked();
  if (shape_numel(root.shape) != 1) {
    throw GraphError("backward requires a scalar loss, got shape " + shape_str(root.shape));
  }
  if (!root.requires_grad) throw GraphError("backward on a tensor that does not require grad");

  detail::dispatch(dtype(), [&]<class T>() {
    const T one = 1;
    detail::accumulate<T>(root, std::span<const T>(&one, 1));
  });
  if (!root.node) return;
  if (root.node->consumed) throw GraphError("backward on a graph already consumed");

  std::vector<std::shared_ptr<detail::Node>> nodes;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root.node};
  seen.insert(root.node.get());
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : node->inputs) {
      const auto& child = in->node;
      if (!child || seen.count(child.get())) continue;
      if (child->consumed) throw GraphError("backward reached a consumed node (" +
                                            std::string(child->op) + ")");
      seen.insert(child.get());
      stack.push_back(child);
    }
    nodes.push_back(std::move(node));
  }

  // Inputs are always created before outputs, so descending sequence numbers
  // are a reverse topological order.
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  for (auto& node : nodes) {
    auto out = node->output.lock();
    if (out && out->grad) node->backward(*out);
  }
  for (auto& node : nodes) {
    node->consumed = true;
    node->backward = nullptr;
    node->inputs.clear();
  }
}

}  // namespace qdf
