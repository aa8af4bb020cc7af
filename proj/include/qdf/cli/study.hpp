#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qdf/data/record.hpp"
#include "qdf/model/model.hpp"
#include "qdf/train/train.hpp"

namespace qdf {

enum class StudyKind { components, sample_points, resolution, blocks };

std::string study_name(StudyKind kind);
/// Throws ValidationError for unknown names.
StudyKind parse_study(const std::string& name);

/// components: mlp_only, mlp_attn, multimodal. sample_points: 50 100 200 500.
/// resolution: 56 112 224 320. blocks: 1 2 3 4.
std::vector<std::string> default_sweep(StudyKind kind);

/// Base model for sweeps: n=1024, H=W=112, three conv stages (16, 32, 64)
/// so every resolution in the default sweep divides by 2^3.
ModelConfig desk_ablation_model();

struct StudySpec {
  StudyKind kind = StudyKind::components;
  std::vector<std::string> settings;          // empty means default_sweep(kind)
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  ModelConfig model = desk_ablation_model();
  TrainConfig train;                          // epochs, lr, batch, dtype; seed and variant are set per run
  double test_fraction = 1.0 / 6.0;
  std::uint64_t split_seed = 0;
  bool record_wall_time = true;

  std::vector<std::string> sweep() const;
  /// Throws ValidationError on an empty sweep or seed list.
  void validate() const;
};

struct StudyRow {
  std::string study;
  std::string setting;
  std::uint64_t seed = 0;
  double test_mse = 0.0;  // NaN when the run failed
  double wall_seconds = 0.0;
  std::string status;     // "ok" or "failed: <reason>"
};

struct StudyResult {
  std::vector<StudyRow> rows;  // sorted by sweep position, then seed

  /// Header `study,setting,seed,test_mse,wall_seconds,status`.
  std::string to_csv() const;
  /// (setting, median test_mse over successful runs) in sweep order; NaN when none succeeded.
  std::vector<std::pair<std::string, double>> medians() const;
  /// Header `study,setting,median_test_mse,runs_ok,runs_total`.
  std::string summary_csv() const;
};

/// Applies one sweep value to copies of the base configs.
void apply_setting(StudyKind kind, const std::string& setting, ModelConfig& model, TrainConfig& train);

/// Splits `data` once, then trains and evaluates every (setting, seed) pair.
/// A failing run is recorded with its status and the study continues.
StudyResult run_study(const StudySpec& spec, const Dataset& data,
                      const std::function<void(const StudyRow&)>& on_row = {});

}  // namespace qdf
