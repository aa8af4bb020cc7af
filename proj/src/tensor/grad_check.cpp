#include "qdf/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qdf/errors.hpp"

namespace qdf {

namespace {

double eval_scalar(const ScalarFunction& f, const std::vector<Tensor>& inputs) {
  NoGradGuard guard;
  const Tensor y = f(inputs);
  if (y.numel() != 1) throw GraphError("grad_check: function must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  const Tensor loss = f(inputs);
  if (loss.numel() != 1) throw GraphError("grad_check: function must return a scalar");
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: function value is not finite");
  loss.backward();

  GradCheckResult result;
  bool first = true;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = inputs[i];
    const std::vector<double> analytic =
        t.has_grad() ? t.grad_values() : std::vector<double>(t.numel(), 0.0);
    for (std::size_t e = 0; e < t.numel(); ++e) {
      const double original = t.at(e);
      t.set(e, original + eps);
      const double up = eval_scalar(f, inputs);
      t.set(e, original - eps);
      const double down = eval_scalar(f, inputs);
      t.set(e, original);
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (first || err > result.max_relative_error) {
        result = {err, i, e, a, numeric};
        first = false;
      }
    }
  }
  return result;
}

}  // namespace qdf
