#include "qdf/data/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qdf/errors.hpp"

namespace qdf {

void GeneratorParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("generator params: " + what); };
  if (count == 0) fail("count must be >= 1");
  if (grid < 2) fail("grid must be >= 2");
  if (!(q0_min > 0.0) || q0_max < q0_min) fail("q0 range must satisfy 0 < q0_min <= q0_max");
  if (!(q_edge_min > q0_max) || q_edge_max < q_edge_min) fail("q_edge range must lie above the q0 range");
  if (!(alpha_min > 0.0) || alpha_max < alpha_min) fail("alpha range must satisfy 0 < alpha_min <= alpha_max");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (!(distractor_fraction >= 0.0 && distractor_fraction <= 1.0)) fail("distractor_fraction must be in [0,1]");
  if (length_schedule.empty()) fail("length_schedule is empty");
  for (auto l : length_schedule)
    if (l == 0) fail("length_schedule entries must be >= 1");
  for (const auto& name : clean_indicators) indicator_index(name);
}

std::vector<double> npsip_grid(std::size_t grid) {
  std::vector<double> x(grid);
  for (std::size_t i = 0; i < grid; ++i) x[i] = static_cast<double>(i) / static_cast<double>(grid - 1);
  x.back() = 1.0;
  return x;
}

std::vector<double> q_profile(const ProfileParams& theta, std::span<const double> npsip) {
  std::vector<double> q(npsip.size());
  for (std::size_t i = 0; i < npsip.size(); ++i)
    q[i] = theta.q0 + (theta.q_edge - theta.q0) * std::pow(npsip[i], theta.alpha);
  return q;
}

IndicatorBasis indicator_basis(std::size_t j, double t) {
  constexpr double pi = std::numbers::pi;
  const double jd = static_cast<double>(j);
  const double freq = 0.5 + 0.25 * static_cast<double>(j % 7);
  const double phase = 0.37 * jd;
  const double ramp_gain = (j % 2 == 0 ? 1.0 : -1.0) * (0.4 + 0.1 * static_cast<double>(j % 4));
  const double wave = 1.0 + 0.5 * static_cast<double>(j % 5);
  const double wave_gain = 0.3 + 0.05 * static_cast<double>(j % 3);
  const double curve_gain = 0.25 + 0.05 * static_cast<double>(j % 5);
  return {
      .fixed = 0.5 * std::sin(2.0 * pi * freq * t + phase),
      .q0_term = ramp_gain * t,
      .q_edge_term = wave_gain * std::cos(pi * wave * t),
      .alpha_term = curve_gain * t * t,
  };
}

std::vector<double> sample_times(std::size_t length) {
  std::vector<double> t(length, 0.0);
  for (std::size_t i = 0; i < length && length > 1; ++i)
    t[i] = static_cast<double>(i) / static_cast<double>(length - 1);
  return t;
}

Series clean_indicator(std::size_t indicator, std::size_t length, const ProfileParams& theta) {
  Series s;
  s.reserve(length);
  for (double t : sample_times(length)) {
    const IndicatorBasis b = indicator_basis(indicator, t);
    s.push_back(b.fixed + theta.q0 * b.q0_term + theta.q_edge * b.q_edge_term +
                theta.alpha * b.alpha_term);
  }
  return s;
}

Dataset synthesize_dataset(const GeneratorParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> q0_dist(params.q0_min, params.q0_max);
  std::uniform_real_distribution<double> qe_dist(params.q_edge_min, params.q_edge_max);
  std::uniform_real_distribution<double> alpha_dist(params.alpha_min, params.alpha_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<bool> clean(kIndicatorCount, false);
  for (const auto& name : params.clean_indicators) clean[indicator_index(name)] = true;

  Dataset ds;
  ds.provenance = "synthetic:seed=" + std::to_string(seed);
  ds.records.reserve(params.count);
  const std::vector<double> grid = npsip_grid(params.grid);
  for (std::size_t r = 0; r < params.count; ++r) {
    ProfileParams theta;
    theta.q0 = q0_dist(rng);
    theta.q_edge = qe_dist(rng);
    theta.alpha = alpha_dist(rng);

    RawRecord rec;
    rec.id = "syn" + std::to_string(seed) + "_" + std::to_string(r);
    rec.npsip = grid;
    rec.q = q_profile(theta, grid);
    rec.indicators.resize(kIndicatorCount);
    for (std::size_t i = 0; i < kIndicatorCount; ++i) {
      const std::size_t len = params.length_schedule[i % params.length_schedule.size()];
      const bool distractor = !clean[i] && unit(rng) < params.distractor_fraction;
      Series s;
      if (distractor) {
        s.resize(len);
        for (auto& v : s) v = gauss(rng);
      } else {
        s = clean_indicator(i, len, theta);
        if (params.noise > 0.0)
          for (auto& v : s) v += params.noise * gauss(rng);
      }
      rec.indicators[i] = std::move(s);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace qdf
