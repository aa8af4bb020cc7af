#pragma once

// Dense loop kernels. Every reduction runs in a fixed index order so results
// do not depend on batch composition or call history.

#include <cstddef>

namespace qdf::kernels {

/// C[m x p] += A[m x k] * B[k x p]
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * p;
    const T* arow = a + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const T av = arow[t];
      const T* brow = b + t * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[k x p] += A[m x k]^T * B[m x p]
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t t = 0; t < m; ++t) {
    const T* arow = a + t * k;
    const T* brow = b + t * p;
    for (std::size_t i = 0; i < k; ++i) {
      const T av = arow[i];
      T* crow = c + i * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

/// dst[cols x rows] = src[rows x cols]^T
template <class T>
void transpose(const T* src, T* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

/// Dot product with four interleaved accumulators combined in a fixed order.
template <class T>
T dot(const T* x, const T* y, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace qdf::kernels
