#include "qdf/charts/charts.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>

#include "qdf/data/transforms.hpp"
#include "qdf/errors.hpp"

namespace qdf {

namespace {

void draw_segment(long x0, long y0, long x1, long y1, std::size_t width, std::uint8_t* canvas) {
  const long dx = std::abs(x1 - x0);
  const long dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1;
  const long sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  for (;;) {
    canvas[static_cast<std::size_t>(y0) * width + static_cast<std::size_t>(x0)] = 1;
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::atomic<std::size_t> g_render_calls{0};

void check_canvas(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw ValidationError("chart resolution must be positive, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
}

}  // namespace

void SamplingPolicy::validate() const {
  if (max_points < 2)
    throw ValidationError("sampling policy: max_points must be >= 2, got " + std::to_string(max_points));
}

std::vector<double> interval_sample(std::span<const double> series, std::size_t max_points) {
  if (series.empty()) throw ValidationError("interval_sample: empty series");
  SamplingPolicy{max_points}.validate();
  const std::size_t n = series.size();
  if (n <= max_points) return {series.begin(), series.end()};
  std::vector<double> out(max_points);
  for (std::size_t i = 0; i < max_points; ++i) out[i] = series[i * n / max_points];
  return out;
}

void rasterize_polyline_into(std::span<const double> values, std::size_t height, std::size_t width,
                             std::span<std::uint8_t> out) {
  if (values.empty()) throw ValidationError("rasterize_polyline: no points");
  check_canvas(height, width);
  if (out.size() != height * width) throw DimensionError("rasterize_polyline: output buffer size mismatch");
  std::fill(out.begin(), out.end(), std::uint8_t{0});
  const std::size_t p = values.size();
  long prev_x = 0, prev_y = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("rasterize_polyline: value " + std::to_string(v) + " outside [0,1]");
    // round-half-up of i*(W-1)/(P-1) in exact integer arithmetic
    const std::size_t col = p == 1 ? width / 2 : (2 * i * (width - 1) + (p - 1)) / (2 * (p - 1));
    const auto row = static_cast<long>(height - 1) - std::lround(v * static_cast<double>(height - 1));
    const auto x = static_cast<long>(col);
    if (i == 0)
      draw_segment(x, row, x, row, width, out.data());
    else
      draw_segment(prev_x, prev_y, x, row, width, out.data());
    prev_x = x;
    prev_y = row;
  }
}

Tensor rasterize_polyline(std::span<const double> values, std::size_t height, std::size_t width,
                          DType dtype) {
  check_canvas(height, width);
  std::vector<std::uint8_t> canvas(height * width);
  rasterize_polyline_into(values, height, width, canvas);
  return Tensor::from_values({height, width}, std::vector<double>(canvas.begin(), canvas.end()), dtype);
}

Tensor ChartStack::images(DType dtype) const {
  return Tensor::from_values({channels, height, width}, std::vector<double>(pixels.begin(), pixels.end()),
                             dtype);
}

std::size_t render_call_count() { return g_render_calls.load(); }

std::vector<std::size_t> selection_indices(const std::vector<std::string>& selection) {
  if (selection.empty()) throw ValidationError("chart selection is empty");
  std::vector<std::size_t> idx;
  idx.reserve(selection.size());
  for (const auto& name : selection) idx.push_back(indicator_index(name));
  return idx;
}

namespace {

void render_channel(const RawRecord& record, std::size_t indicator, const SamplingPolicy& policy,
                    std::size_t height, std::size_t width, std::span<std::uint8_t> out) {
  if (indicator >= record.indicators.size()) {
    throw ValidationError("record '" + record.id + "' lacks indicator '" +
                          canonical_indicator_names().at(indicator) + "'");
  }
  const auto sampled = interval_sample(record.indicators[indicator], policy.max_points);
  rasterize_polyline_into(normalize_series(sampled), height, width, out);
}

}  // namespace

ChartStack render_charts(const RawRecord& record, const std::vector<std::string>& selection,
                         const SamplingPolicy& policy, std::size_t height, std::size_t width) {
  policy.validate();
  check_canvas(height, width);
  ++g_render_calls;
  const auto idx = selection_indices(selection);
  ChartStack stack{idx.size(), height, width, std::vector<std::uint8_t>(idx.size() * height * width)};
  const std::size_t plane = height * width;
  for (std::size_t k = 0; k < idx.size(); ++k)
    render_channel(record, idx[k], policy, height, width,
                   std::span<std::uint8_t>(stack.pixels).subspan(k * plane, plane));
  return stack;
}

void render_charts_into(const RawRecord& record, std::span<const std::size_t> selection,
                        const SamplingPolicy& policy, std::size_t height, std::size_t width,
                        std::span<double> out) {
  policy.validate();
  check_canvas(height, width);
  ++g_render_calls;
  const std::size_t plane = height * width;
  if (out.size() != selection.size() * plane) throw DimensionError("render_charts_into: output size mismatch");
  std::vector<std::uint8_t> canvas(plane);
  for (std::size_t k = 0; k < selection.size(); ++k) {
    render_channel(record, selection[k], policy, height, width, canvas);
    std::copy(canvas.begin(), canvas.end(), out.begin() + static_cast<std::ptrdiff_t>(k * plane));
  }
}

std::string encode_pgm(std::span<const std::uint8_t> binary, std::size_t height, std::size_t width) {
  if (binary.size() != height * width) throw DimensionError("encode_pgm: pixel count mismatch");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + binary.size());
  for (auto px : binary) out.push_back(static_cast<char>(px ? 255 : 0));
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> binary,
               std::size_t height, std::size_t width) {
  const std::string bytes = encode_pgm(binary, height, width);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

std::vector<std::filesystem::path> export_charts(const ChartStack& stack, const std::string& record_id,
                                                 const std::vector<std::string>& selection,
                                                 const std::filesystem::path& dir) {
  if (selection.size() != stack.channels)
    throw DimensionError("export_charts: selection has " + std::to_string(selection.size()) +
                         " names for " + std::to_string(stack.channels) + " channels");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t k = 0; k < stack.channels; ++k) {
    paths.push_back(dir / (record_id + "_" + selection[k] + ".pgm"));
    write_pgm(paths.back(), stack.channel(k), stack.height, stack.width);
  }
  return paths;
}

}  // namespace qdf
