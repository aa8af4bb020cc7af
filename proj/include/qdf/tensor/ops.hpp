#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "qdf/tensor/tensor.hpp"

namespace qdf {

// Elementwise ops require identical shapes and dtypes; there is no implicit
// broadcasting. The only broadcast patterns are add_bias (last axis) and the
// per-channel bias/affine terms inside conv2d and batchnorm2d.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x[..., C] + bias[C]
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// [m x k] * [k x p] -> [m x p]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [B x m x k] * [B x k x p] -> [B x m x p]
Tensor bmm(const Tensor& a, const Tensor& b);
/// Swaps the last two axes of a rank-3 tensor.
Tensor transpose_last2(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Elements [start, start+length) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes over the last axis, then applies gamma[D], beta[D].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& x);
/// Mean along `axis`; the axis is removed (a rank-1 input yields shape [1]).
Tensor mean(const Tensor& x, std::size_t axis);

/// Cross-correlation with zero padding.
/// x[B x C x H x W], weight[F x C x kh x kw], bias[F] -> [B x F x H' x W'].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Per-channel running statistics. Updated in place by training-mode calls.
struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
};

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, const BatchNormOptions& options);

/// Window maximum. Ties go to the first element in row-major window order.
Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride);

/// [B x C x H x W] -> [B x C]
Tensor global_avgpool(const Tensor& x);

/// Elementwise op defined by caller-supplied value and derivative functions.
/// Used by tests and diagnostics to plug arbitrary (including faulty) kernels
/// into the tape.
Tensor map_elementwise(const Tensor& x, std::string name, std::function<double(double)> f,
                       std::function<double(double x, double y)> dfdx);

}  // namespace qdf
