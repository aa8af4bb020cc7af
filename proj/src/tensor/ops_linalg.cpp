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

// Batched product shared by matmul (batch 1) and bmm.
Tensor batched_product(const Tensor& a, const Tensor& b, std::size_t batch, std::size_t m,
                       std::size_t k, std::size_t p, Shape out_shape, const char* op) {
  Tensor out = detail::empty(std::move(out_shape), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto x = values_of<T>(a);
    auto y = values_of<T>(b);
    auto o = values_of_mut<T>(out);
    for (std::size_t n = 0; n < batch; ++n)
      kernels::gemm_nn(x.data() + n * m * k, y.data() + n * k * p, o.data() + n * m * p, m, k, p);
  });
  detail::check_finite(out, op);
  detail::record(out, op, {a, b}, [ai = a.impl(), bi = b.impl(), batch, m, k, p](TensorImpl& o) {
    dispatch(detail::buffer_dtype(o.data), [&]<class T>() {
      auto g = grad_of<T>(o);
      const auto& x = detail::vec<T>(ai->data);
      const auto& y = detail::vec<T>(bi->data);
      if (ai->requires_grad) {
        // dA = dC * B^T
        auto d = grad_slot<T>(*ai);
        std::vector<T> bt(k * p);
        for (std::size_t n = 0; n < batch; ++n) {
          kernels::transpose(y.data() + n * k * p, bt.data(), k, p);
          kernels::gemm_nn(g.data() + n * m * p, bt.data(), d.data() + n * m * k, m, p, k);
        }
      }
      if (bi->requires_grad) {
        // dB = A^T * dC
        auto d = grad_slot<T>(*bi);
        for (std::size_t n = 0; n < batch; ++n)
          kernels::gemm_tn(x.data() + n * m * k, g.data() + n * m * p, d.data() + n * k * p, m, k, p);
      }
    });
  });
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_defined(a, "matmul");
  detail::require_defined(b, "matmul");
  if (a.dim() != 2 || b.dim() != 2 || a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  detail::require_same_dtype(a, b, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), p = b.extent(1);
  return batched_product(a, b, 1, m, k, p, {m, p}, "matmul");
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  detail::require_defined(a, "bmm");
  detail::require_defined(b, "bmm");
  if (a.dim() != 3 || b.dim() != 3 || a.extent(0) != b.extent(0) || a.extent(2) != b.extent(1)) {
    throw DimensionError("bmm: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  detail::require_same_dtype(a, b, "bmm");
  const std::size_t batch = a.extent(0), m = a.extent(1), k = a.extent(2), p = b.extent(2);
  return batched_product(a, b, batch, m, k, p, {batch, m, p}, "bmm");
}

}  // namespace qdf
