#include "qdf/cli/study.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qdf/data/transforms.hpp"
#include "qdf/errors.hpp"

namespace qdf {

std::string study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::components: return "components";
    case StudyKind::sample_points: return "sample_points";
    case StudyKind::resolution: return "resolution";
    case StudyKind::blocks: return "blocks";
  }
  return "?";
}

StudyKind parse_study(const std::string& name) {
  for (auto k : {StudyKind::components, StudyKind::sample_points, StudyKind::resolution, StudyKind::blocks})
    if (study_name(k) == name) return k;
  throw ValidationError("unknown study '" + name + "' (expected components, sample_points, resolution or blocks)");
}

std::vector<std::string> default_sweep(StudyKind kind) {
  switch (kind) {
    case StudyKind::components: return {"mlp_only", "mlp_attn", "multimodal"};
    case StudyKind::sample_points: return {"50", "100", "200", "500"};
    case StudyKind::resolution: return {"56", "112", "224", "320"};
    case StudyKind::blocks: return {"1", "2", "3", "4"};
  }
  return {};
}

ModelConfig desk_ablation_model() {
  ModelConfig c;
  c.height = 112;
  c.width = 112;
  c.conv_channels = {16, 32, 64};
  return c;
}

std::vector<std::string> StudySpec::sweep() const { return settings.empty() ? default_sweep(kind) : settings; }

void StudySpec::validate() const {
  if (sweep().empty()) throw ValidationError("study sweep is empty");
  if (seeds.empty()) throw ValidationError("study seed list is empty");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must be in (0, 1)");
}

namespace {

std::size_t parse_count(const std::string& setting) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (!setting.empty() && std::isdigit(static_cast<unsigned char>(setting.front()))) v = std::stoull(setting, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != setting.size()) throw ValidationError("setting '" + setting + "' is not a count");
  return static_cast<std::size_t>(v);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void apply_setting(StudyKind kind, const std::string& setting, ModelConfig& model, TrainConfig& train) {
  switch (kind) {
    case StudyKind::components: train.variant = parse_variant(setting); break;
    case StudyKind::sample_points: model.max_points = parse_count(setting); break;
    case StudyKind::resolution: model.height = model.width = parse_count(setting); break;
    case StudyKind::blocks: model.fusion_blocks = parse_count(setting); break;
  }
}

std::string StudyResult::to_csv() const {
  std::string out = "study,setting,seed,test_mse,wall_seconds,status\n";
  char wall[64];
  for (const auto& r : rows) {
    std::snprintf(wall, sizeof wall, "%.6f", r.wall_seconds);
    out += csv_field(r.study) + "," + csv_field(r.setting) + "," + std::to_string(r.seed) + "," +
           number(r.test_mse) + "," + wall + "," + csv_field(r.status) + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, double>> StudyResult::medians() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& r : rows) {
    if (std::none_of(out.begin(), out.end(), [&](const auto& p) { return p.first == r.setting; }))
      out.emplace_back(r.setting, std::numeric_limits<double>::quiet_NaN());
  }
  for (auto& [setting, med] : out) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.setting == setting && r.status == "ok") v.push_back(r.test_mse);
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

std::string StudyResult::summary_csv() const {
  std::string out = "study,setting,median_test_mse,runs_ok,runs_total\n";
  for (const auto& [setting, med] : medians()) {
    std::size_t ok = 0, total = 0;
    std::string study;
    for (const auto& r : rows) {
      if (r.setting != setting) continue;
      study = r.study;
      ++total;
      ok += r.status == "ok";
    }
    out += csv_field(study) + "," + csv_field(setting) + "," + number(med) + "," + std::to_string(ok) + "," +
           std::to_string(total) + "\n";
  }
  return out;
}

StudyResult run_study(const StudySpec& spec, const Dataset& data,
                      const std::function<void(const StudyRow&)>& on_row) {
  spec.validate();
  const auto [train_set, test_set] = split_dataset(data, spec.test_fraction, spec.split_seed);
  const auto sweep = spec.sweep();
  StudyResult result;
  for (const auto& setting : sweep) {
    for (auto seed : spec.seeds) {
      StudyRow row{study_name(spec.kind), setting, seed, std::numeric_limits<double>::quiet_NaN(), 0.0, "ok"};
      const auto start = std::chrono::steady_clock::now();
      try {
        ModelConfig model = spec.model;
        TrainConfig train_cfg = spec.train;
        train_cfg.seed = seed;
        apply_setting(spec.kind, setting, model, train_cfg);
        TrainOptions options;
        options.record_wall_time = spec.record_wall_time;
        TrainResult r = train(model, train_cfg, train_set, options);
        row.test_mse = evaluate(r.checkpoint, test_set);
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      if (spec.record_wall_time)
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.rows.push_back(row);
      if (on_row) on_row(result.rows.back());
    }
  }
  // Rows are produced in sweep order already; the stable sort keeps that
  // contract explicit should runs ever be scheduled out of order.
  std::stable_sort(result.rows.begin(), result.rows.end(), [&](const StudyRow& a, const StudyRow& b) {
    const auto ia = std::find(sweep.begin(), sweep.end(), a.setting) - sweep.begin();
    const auto ib = std::find(sweep.begin(), sweep.end(), b.setting) - sweep.begin();
    return ia != ib ? ia < ib : a.seed < b.seed;
  });
  return result;
}

}  // namespace qdf
