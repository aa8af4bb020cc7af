#include "qdf/data/record.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "qdf/errors.hpp"

namespace qdf {

namespace {

std::vector<std::string> make_names() {
  std::vector<std::string> names;
  names.reserve(kIndicatorCount);
  char buf[16];
  for (std::size_t i = 0; i < kIndicatorCount; ++i) {
    std::snprintf(buf, sizeof buf, "ind_%03zu", i);
    names.emplace_back(buf);
  }
  return names;
}

const std::unordered_map<std::string_view, std::size_t>& name_index() {
  static const auto index = [] {
    std::unordered_map<std::string_view, std::size_t> m;
    const auto& names = canonical_indicator_names();
    for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], i);
    return m;
  }();
  return index;
}

[[noreturn]] void invalid(const RawRecord& r, const std::string& field, const std::string& what) {
  throw ValidationError("record '" + r.id + "' field '" + field + "': " + what);
}

}  // namespace

const std::vector<std::string>& canonical_indicator_names() {
  static const std::vector<std::string> names = make_names();
  return names;
}

std::size_t indicator_index(std::string_view name) {
  const auto& idx = name_index();
  const auto it = idx.find(name);
  if (it == idx.end()) throw ValidationError("unknown indicator '" + std::string(name) + "'");
  return it->second;
}

const std::vector<std::string>& default_chart_selection() {
  static const std::vector<std::string> selection(
      canonical_indicator_names().end() - static_cast<std::ptrdiff_t>(kChartIndicatorCount),
      canonical_indicator_names().end());
  return selection;
}

const Series& RawRecord::indicator(std::string_view name) const {
  const std::size_t i = indicator_index(name);
  if (i >= indicators.size()) invalid(*this, std::string(name), "missing indicator");
  return indicators[i];
}

void validate_record(const RawRecord& r) {
  if (r.id.empty()) throw ValidationError("record with empty id");
  if (r.indicators.size() != kIndicatorCount) {
    invalid(r, "indicators", "expected " + std::to_string(kIndicatorCount) + " series, got " +
                                 std::to_string(r.indicators.size()));
  }
  const auto& names = canonical_indicator_names();
  for (std::size_t i = 0; i < r.indicators.size(); ++i) {
    if (r.indicators[i].empty()) invalid(r, names[i], "empty series");
    for (double v : r.indicators[i])
      if (!std::isfinite(v)) invalid(r, names[i], "non-finite value");
  }
  const std::size_t g = r.npsip.size();
  if (g < 2) invalid(r, "npsip", "grid needs at least 2 points");
  if (r.q.size() != g) {
    invalid(r, "q", "length " + std::to_string(r.q.size()) + " differs from npsip length " +
                        std::to_string(g));
  }
  if (r.npsip.front() != 0.0) invalid(r, "npsip", "first value must be 0");
  if (r.npsip.back() != 1.0) invalid(r, "npsip", "last value must be 1");
  for (std::size_t i = 0; i < g; ++i) {
    if (!std::isfinite(r.npsip[i])) invalid(r, "npsip", "non-finite value");
    if (!std::isfinite(r.q[i])) invalid(r, "q", "non-finite value");
    if (i > 0 && !(r.npsip[i] > r.npsip[i - 1])) invalid(r, "npsip", "not strictly increasing");
  }
}

void validate_dataset(const Dataset& ds) {
  std::unordered_set<std::string_view> ids;
  for (const auto& r : ds.records) {
    validate_record(r);
    if (!ids.insert(r.id).second) throw ValidationError("duplicate record id '" + r.id + "'");
  }
}

}  // namespace qdf
