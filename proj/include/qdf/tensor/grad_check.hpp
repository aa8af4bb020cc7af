#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "qdf/tensor/tensor.hpp"

namespace qdf {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;    // index into the inputs list
  std::size_t worst_element = 0;  // flat element index within that input
  double analytic = 0.0;          // gradients at the worst element
  double numeric = 0.0;
};

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Relative error per element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// `f` must be pure: it is re-evaluated twice per input element. Inputs are
/// leaves; they are marked requires_grad, perturbed in place and restored.
GradCheckResult grad_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps);

}  // namespace qdf
