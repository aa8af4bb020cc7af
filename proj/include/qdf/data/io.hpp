#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qdf/data/record.hpp"

namespace qdf {

// JSON Lines, one record per line:
//   {"id": "...", "indicators": {"ind_000": [...], ...}, "npsip": [...], "q": [...]}

/// Parses one line. `line_number` is 1-based and only used in error messages.
RawRecord parse_record(std::string_view line, std::size_t line_number = 1);
std::string format_record(const RawRecord& record);

/// Blank lines are skipped. Malformed lines raise ParseError with the line
/// number; schema violations raise ValidationError naming record and field.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// One indicator name per line; blank lines are skipped. Throws
/// ValidationError on unknown or duplicate names.
std::vector<std::string> load_name_list(const std::filesystem::path& path);

}  // namespace qdf
