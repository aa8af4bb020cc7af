#include "qdf/data/io.hpp"

#include <fstream>
#include <string>
#include <unordered_set>

#include "json.hpp"
#include "qdf/errors.hpp"

namespace qdf {

using nlohmann::json;

namespace {

std::vector<double> number_array(const json& j, std::size_t line, const std::string& field) {
  if (!j.is_array()) throw ParseError(line, "field '" + field + "' is not an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(line, "field '" + field + "' contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

const json& member(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

RawRecord parse_record(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, e.what());
  }
  if (!j.is_object()) throw ParseError(line_number, "record is not a JSON object");

  RawRecord r;
  const json& id = member(j, "id", line_number);
  if (!id.is_string()) throw ParseError(line_number, "field 'id' is not a string");
  r.id = id.get<std::string>();

  const json& inds = member(j, "indicators", line_number);
  if (!inds.is_object()) throw ParseError(line_number, "field 'indicators' is not an object");
  const auto& names = canonical_indicator_names();
  r.indicators.resize(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = inds.find(names[i]);
    if (it == inds.end()) {
      throw ValidationError("record '" + r.id + "' field 'indicators': missing indicator '" +
                            names[i] + "'");
    }
    r.indicators[i] = number_array(*it, line_number, names[i]);
  }
  if (inds.size() != names.size()) {
    for (const auto& [key, value] : inds.items()) {
      (void)value;
      indicator_index(key);  // throws on the first unknown name
    }
  }
  r.npsip = number_array(member(j, "npsip", line_number), line_number, "npsip");
  r.q = number_array(member(j, "q", line_number), line_number, "q");
  validate_record(r);
  return r;
}

std::string format_record(const RawRecord& r) {
  json inds = json::object();
  const auto& names = canonical_indicator_names();
  for (std::size_t i = 0; i < r.indicators.size() && i < names.size(); ++i) inds[names[i]] = r.indicators[i];
  json j = json::object();
  j["id"] = r.id;
  j["indicators"] = std::move(inds);
  j["npsip"] = r.npsip;
  j["q"] = r.q;
  return j.dump();
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
  Dataset ds;
  ds.provenance = path.string();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ds.records.push_back(parse_record(line, line_number));
  }
  validate_dataset(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write dataset '" + path.string() + "'");
  for (const auto& r : ds.records) out << format_record(r) << '\n';
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

std::vector<std::string> load_name_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open name list '" + path.string() + "'");
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::string name = line.substr(b, e - b + 1);
    indicator_index(name);
    if (!seen.insert(name).second) throw ValidationError("name list '" + path.string() + "' repeats '" + name + "'");
    names.push_back(std::move(name));
  }
  if (names.empty()) throw ValidationError("name list '" + path.string() + "' is empty");
  return names;
}

}  // namespace qdf
