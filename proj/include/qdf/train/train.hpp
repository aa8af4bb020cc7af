#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qdf/data/record.hpp"
#include "qdf/model/model.hpp"
#include "qdf/tensor/tensor.hpp"

namespace qdf {

struct TrainConfig {
  std::size_t epochs = 130;
  double lr = 0.001;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  Variant variant = Variant::multimodal;
  DType dtype = DType::f64;
  std::size_t eval_every = 1;  // epochs between test evaluations

  /// Throws ValidationError when epochs, batch_size or eval_every is 0 or lr <= 0.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// p <- p - lr * grad(p) for each named parameter. Gradients are left in place.
/// Throws ValidationError naming the first parameter without a gradient.
void sgd_step(Params& params, const std::vector<std::string>& names, double lr);

/// Model inputs and targets for a list of records.
struct Batch {
  Tensor raw;     // [B x n]
  Tensor charts;  // [B x K x H x W], undefined when charts are not needed
  Tensor target;  // [B x G]
};

/// Throws DimensionError when a record's grid differs from config.grid.
Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices, const ModelConfig& config,
                 DType dtype, bool with_charts);

struct MetricsRow {
  std::size_t epoch = 0;
  std::string split;  // "train" or "test"
  double mse = 0.0;
  double wall_seconds = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

/// Epoch 0 holds eval-mode MSE of the initial parameters. Later "train" rows
/// hold the element-weighted mean of that epoch's batch losses; "test" rows
/// hold evaluate() on the test set.
struct MetricsLog {
  std::vector<MetricsRow> rows;

  /// Header `epoch,split,mse,wall_seconds`; mse with 17 significant digits.
  std::string to_csv() const;
  void save(const std::filesystem::path& path) const;
  /// Last row of `split`; throws ValidationError when there is none.
  const MetricsRow& last(const std::string& split) const;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;
  Params params;
  std::string rng_state;  // textual std::mt19937_64 state of the shuffling rng
};

struct TrainOptions {
  const Dataset* test = nullptr;   // evaluated every eval_every epochs when set
  bool record_wall_time = true;    // false writes 0 so metrics files are reproducible
  std::size_t eval_batch_size = 64;
  std::function<void(const MetricsRow&)> on_row;  // progress callback
};

struct TrainResult {
  Checkpoint checkpoint;
  MetricsLog log;
};

/// Seeded SGD over shuffled batches (the last partial batch is kept).
/// Throws NumericError with epoch, batch and loss when the loss is not finite.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config, const Dataset& train_set,
                  const TrainOptions& options = {});

/// Mean squared error over every (record, grid point) pair, eval mode.
/// The result does not depend on batch_size.
double evaluate(Variant variant, Params& params, const ModelConfig& config, const Dataset& dataset,
                std::size_t batch_size = 64);
double evaluate(Checkpoint& checkpoint, const Dataset& dataset, std::size_t batch_size = 64);

/// Binary layout: "QDF1" | u32 LE header length | JSON header | LE payload.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError (with byte offset) on bad magic, truncation or checksum
/// mismatch, and VersionError on an unknown format version.
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qdf
