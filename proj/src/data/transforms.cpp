#include "qdf/data/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qdf/errors.hpp"

namespace qdf {

std::vector<double> normalize_series(std::span<const double> series) {
  if (series.empty()) throw ValidationError("normalize_series: empty series");
  for (double v : series)
    if (!std::isfinite(v)) throw ValidationError("normalize_series: non-finite value");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  const double min = *lo, max = *hi;
  std::vector<double> out(series.size(), 0.5);
  if (max > min) {
    const double span = max - min;
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - min) / span;
    // Exact endpoints regardless of rounding in the division.
    out[static_cast<std::size_t>(lo - series.begin())] = 0.0;
    out[static_cast<std::size_t>(hi - series.begin())] = 1.0;
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction,
                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("split: test_fraction must be in (0, 1), got " +
                          std::to_string(test_fraction));
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  // The small slack absorbs representation error such as 0.1 * 10 = 1.0000000000000002.
  const auto n_test =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  Dataset train, test;
  train.split = "train";
  test.split = "test";
  train.provenance = test.provenance = ds.provenance;
  for (auto i : train_idx) train.records.push_back(ds.records[i]);
  for (auto i : test_idx) test.records.push_back(ds.records[i]);
  return {std::move(train), std::move(test)};
}

void vectorize_raw_into(const RawRecord& record, std::span<double> out) {
  if (out.size() < kIndicatorCount) {
    throw ValidationError("vectorize_raw: length " + std::to_string(out.size()) +
                          " is below the indicator count " + std::to_string(kIndicatorCount));
  }
  std::size_t pos = 0;
  for (const auto& series : record.indicators) {
    if (pos == out.size()) break;
    const auto norm = normalize_series(series);
    const std::size_t take = std::min(norm.size(), out.size() - pos);
    std::copy_n(norm.begin(), take, out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += take;
  }
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(pos), out.end(), 0.0);
}

Tensor vectorize_raw(const RawRecord& record, std::size_t length, DType dtype) {
  std::vector<double> v(length);
  vectorize_raw_into(record, v);
  return Tensor::from_values({length}, v, dtype);
}

}  // namespace qdf
