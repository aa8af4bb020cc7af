#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qdf/data/record.hpp"
#include "qdf/tensor/tensor.hpp"

namespace qdf {

struct SamplingPolicy {
  std::size_t max_points = 100;  // M

  /// Throws ValidationError when M < 2.
  void validate() const;
};

/// Series of N <= M points are returned unchanged; longer ones are reduced to
/// the M values at indices floor(i*N/M), i = 0..M-1.
std::vector<double> interval_sample(std::span<const double> series, std::size_t max_points);

/// Binary line chart of P normalized values on an H x W canvas, row-major,
/// 1 for line pixels and 0 for background. Point i sits at column
/// round(i*(W-1)/(P-1)) (the centre column when P == 1) and row
/// (H-1) - round(v*(H-1)); consecutive points are joined by Bresenham segments.
void rasterize_polyline_into(std::span<const double> values, std::size_t height, std::size_t width,
                             std::span<std::uint8_t> out);
Tensor rasterize_polyline(std::span<const double> values, std::size_t height, std::size_t width,
                          DType dtype = DType::f64);

/// K binary charts of one record, one per selected indicator, in selection order.
struct ChartStack {
  std::size_t channels = 0;  // K
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // K*H*W, 0 or 1

  std::uint8_t at(std::size_t k, std::size_t y, std::size_t x) const {
    return pixels[(k * height + y) * width + x];
  }
  std::span<const std::uint8_t> channel(std::size_t k) const {
    return std::span<const std::uint8_t>(pixels).subspan(k * height * width, height * width);
  }
  /// [K x H x W] tensor with values 0.0 and 1.0.
  Tensor images(DType dtype = DType::f64) const;

  bool operator==(const ChartStack&) const = default;
};

/// Per selected name: interval_sample, normalize_series, rasterize_polyline.
/// Throws ValidationError naming any selected indicator that is unknown.
ChartStack render_charts(const RawRecord& record, const std::vector<std::string>& selection,
                         const SamplingPolicy& policy, std::size_t height, std::size_t width);

/// Same pixels as render_charts written as 0.0/1.0 into `out` (K*H*W values).
void render_charts_into(const RawRecord& record, std::span<const std::size_t> selection_indices,
                        const SamplingPolicy& policy, std::size_t height, std::size_t width,
                        std::span<double> out);

/// Number of chart stacks rendered by this process (render_charts and
/// render_charts_into calls), for checking which code paths render.
std::size_t render_call_count();

/// Indicator positions of `selection` in canonical order.
std::vector<std::size_t> selection_indices(const std::vector<std::string>& selection);

/// Binary PGM (P5, maxval 255), 0 -> 0 and 1 -> 255.
std::string encode_pgm(std::span<const std::uint8_t> binary, std::size_t height, std::size_t width);
void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> binary,
               std::size_t height, std::size_t width);

/// Writes `{record_id}_{indicator}.pgm` for every channel into `dir` and returns the paths.
std::vector<std::filesystem::path> export_charts(const ChartStack& stack, const std::string& record_id,
                                                 const std::vector<std::string>& selection,
                                                 const std::filesystem::path& dir);

}  // namespace qdf
