#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qdf/data/record.hpp"
#include "qdf/tensor/tensor.hpp"

namespace qdf {

/// (x - min) / (max - min); a constant series maps every point to 0.5.
/// Throws ValidationError on empty or non-finite input.
std::vector<double> normalize_series(std::span<const double> series);

/// Shuffles by seed, puts floor(N * test_fraction) records in the test part
/// and the rest in train. Both parts keep the dataset's original order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed);

/// Per-indicator min-max normalized series concatenated in canonical order,
/// then truncated or zero-padded at the tail to exactly `length` values.
void vectorize_raw_into(const RawRecord& record, std::span<double> out);
Tensor vectorize_raw(const RawRecord& record, std::size_t length, DType dtype = DType::f64);

}  // namespace qdf
