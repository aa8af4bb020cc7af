#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace qdf {

inline constexpr std::size_t kIndicatorCount = 141;
inline constexpr std::size_t kChartIndicatorCount = 76;

/// The 141 indicator names in schema order: ind_000 .. ind_140.
const std::vector<std::string>& canonical_indicator_names();

/// Position of `name` in the canonical list. Throws ValidationError if unknown.
std::size_t indicator_index(std::string_view name);

/// The 76 indicators rendered as charts by default: the last 76 of the
/// canonical list (ind_065 .. ind_140).
const std::vector<std::string>& default_chart_selection();

using Series = std::vector<double>;

/// One sample: 141 variable-length indicator series plus the q profile on
/// the normalized-flux grid.
struct RawRecord {
  std::string id;
  std::vector<Series> indicators;  // canonical order, kIndicatorCount entries
  std::vector<double> npsip;       // strictly increasing, 0 .. 1
  std::vector<double> q;           // same length as npsip

  const Series& indicator(std::string_view name) const;
  std::size_t grid_size() const { return q.size(); }

  bool operator==(const RawRecord&) const = default;
};

/// Throws ValidationError naming the record id and the offending field.
void validate_record(const RawRecord& record);

struct Dataset {
  std::vector<RawRecord> records;
  std::string split = "all";  // "train", "test" or "all"
  std::string provenance;     // "synthetic:seed=<n>" or a file path

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Validates every record and checks that ids are unique.
void validate_dataset(const Dataset& dataset);

}  // namespace qdf
