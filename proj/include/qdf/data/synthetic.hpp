#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdf/data/record.hpp"

namespace qdf {

/// Knobs of the synthetic stand-in for simulation data.
struct GeneratorParams {
  std::size_t count = 1200;
  std::size_t grid = 101;  // G
  double q0_min = 0.8, q0_max = 1.2;
  double q_edge_min = 3.0, q_edge_max = 5.0;
  double alpha_min = 1.0, alpha_max = 3.0;
  double noise = 0.01;  // std-dev of additive Gaussian noise on every indicator value
  /// Indicator i has length length_schedule[i % size]. The default mixes
  /// series shorter and longer than the usual sampling caps (50..500).
  std::vector<std::size_t> length_schedule = {8,  16, 24, 32, 12, 20, 40, 28, 64, 110,
                                              10, 18, 26, 36, 14, 22, 48, 30, 80, 520};
  /// Probability that an indicator outside `clean_indicators` is replaced by
  /// pure noise in a given record.
  double distractor_fraction = 0.5;
  /// Indicators never replaced by distractors; defaults to the chart selection.
  std::vector<std::string> clean_indicators = default_chart_selection();

  /// Throws ValidationError on q0 <= 0, q_edge <= q0, alpha <= 0, noise < 0, etc.
  void validate() const;
};

struct ProfileParams {
  double q0 = 1.0;
  double q_edge = 4.0;
  double alpha = 2.0;
};

/// G evenly spaced points from 0 to 1 inclusive.
std::vector<double> npsip_grid(std::size_t grid);

/// q(x) = q0 + (q_edge - q0) * x^alpha
std::vector<double> q_profile(const ProfileParams& theta, std::span<const double> npsip);

/// Indicator value at normalized time t in [0,1]:
///   fixed(t) + q0 * q0_term(t) + q_edge * q_edge_term(t) + alpha * alpha_term(t)
/// The four shape functions depend only on the indicator index.
struct IndicatorBasis {
  double fixed = 0.0;
  double q0_term = 0.0;
  double q_edge_term = 0.0;
  double alpha_term = 0.0;
};
IndicatorBasis indicator_basis(std::size_t indicator, double t);

/// Sample times of a series of `length` points: i/(length-1), or {0} for one point.
std::vector<double> sample_times(std::size_t length);

/// Noise-free series for one indicator.
Series clean_indicator(std::size_t indicator, std::size_t length, const ProfileParams& theta);

/// Deterministic in (params, seed). Record ids are "syn<seed>_<index>".
Dataset synthesize_dataset(const GeneratorParams& params, std::uint64_t seed);

}  // namespace qdf
