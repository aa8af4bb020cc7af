#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace qdf {

struct GradSuiteOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double eps = 1e-4;
  double tolerance = 1e-4;
  /// Name of an op whose derivative is replaced by a deliberately wrong one
  /// ("sigmoid" is the only supported value). Empty runs the real kernels.
  std::string inject_fault;
};

struct GradSuiteEntry {
  std::string op;
  double max_rel_err = 0.0;  // worst over all seeds
  std::uint64_t worst_seed = 0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  bool passed = true;
};

/// Finite-difference check of every differentiable op, attention, the MSE
/// loss and the full model (eval and training mode) on small random inputs.
std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options = {});

}  // namespace qdf
