#include "qdf/train/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "qdf/charts/charts.hpp"
#include "qdf/data/transforms.hpp"
#include "qdf/errors.hpp"

namespace qdf {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("train config: " + what); };
  if (epochs == 0) fail("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be a positive finite number");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (eval_every == 0) fail("eval_every must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"lr", c.lr},
          {"batch_size", c.batch_size}, {"seed", c.seed},
          {"variant", variant_name(c.variant)}, {"dtype", dtype_name(c.dtype)},
          {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.dtype = parse_dtype(j.at("dtype").get<std::string>());
    c.eval_every = j.at("eval_every").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

template <class T>
void sgd_update(Tensor& p, const std::vector<double>& g, double lr) {
  auto data = p.mutable_data<T>();
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * g[i]);
}

}  // namespace

void sgd_step(Params& params, const std::vector<std::string>& names, double lr) {
  std::vector<std::pair<Tensor*, std::vector<double>>> updates;
  updates.reserve(names.size());
  for (const auto& name : names) {
    const auto it = params.tensors.find(name);
    if (it == params.tensors.end()) throw ValidationError("sgd_step: unknown parameter '" + name + "'");
    if (!it->second.has_grad()) throw ValidationError("sgd_step: parameter '" + name + "' has no gradient");
    updates.emplace_back(&it->second, it->second.grad_values());
  }
  for (auto& [tensor, grad] : updates) {
    if (tensor->dtype() == DType::f64)
      sgd_update<double>(*tensor, grad, lr);
    else
      sgd_update<float>(*tensor, grad, lr);
  }
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices, const ModelConfig& config,
                 DType dtype, bool with_charts) {
  const std::size_t b = indices.size();
  if (b == 0) throw ValidationError("make_batch: empty batch");
  std::vector<double> raw(b * config.raw_length), target(b * config.grid);
  std::vector<double> charts;
  std::vector<std::size_t> selection;
  const std::size_t chart_size = config.charts() * config.height * config.width;
  if (with_charts) {
    charts.resize(b * chart_size);
    selection = selection_indices(config.chart_selection);
  }
  const SamplingPolicy policy{config.max_points};
  for (std::size_t i = 0; i < b; ++i) {
    const RawRecord& r = dataset.records.at(indices[i]);
    if (r.q.size() != config.grid) {
      throw DimensionError("record '" + r.id + "' has " + std::to_string(r.q.size()) +
                           " grid points but the model predicts " + std::to_string(config.grid));
    }
    vectorize_raw_into(r, std::span<double>(raw).subspan(i * config.raw_length, config.raw_length));
    std::copy(r.q.begin(), r.q.end(), target.begin() + static_cast<std::ptrdiff_t>(i * config.grid));
    if (with_charts)
      render_charts_into(r, selection, policy, config.height, config.width,
                         std::span<double>(charts).subspan(i * chart_size, chart_size));
  }
  Batch batch;
  batch.raw = Tensor::from_values({b, config.raw_length}, raw, dtype);
  batch.target = Tensor::from_values({b, config.grid}, target, dtype);
  if (with_charts)
    batch.charts = Tensor::from_values({b, config.charts(), config.height, config.width}, charts, dtype);
  return batch;
}

std::string MetricsLog::to_csv() const {
  std::string out = "epoch,split,mse,wall_seconds\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.6f\n", r.epoch, r.split.c_str(), r.mse, r.wall_seconds);
    out += buf;
  }
  return out;
}

void MetricsLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write metrics '" + path.string() + "'");
  out << to_csv();
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

const MetricsRow& MetricsLog::last(const std::string& split) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->split == split) return *it;
  throw ValidationError("metrics log has no '" + split + "' rows");
}

double evaluate(Variant variant, Params& params, const ModelConfig& config, const Dataset& dataset,
                std::size_t batch_size) {
  if (dataset.empty()) throw ValidationError("evaluate: empty dataset");
  if (batch_size == 0) throw ValidationError("evaluate: batch_size must be >= 1");
  NoGradGuard no_grad;
  const DType dtype = params.dtype();
  const bool with_charts = variant == Variant::multimodal;
  double sse = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(dataset, idx, config, dtype, with_charts);
    const auto pred = forward(variant, batch.raw, batch.charts, params, config, false).values();
    const auto gt = batch.target.values();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - gt[i];
      sse += d * d;
    }
  }
  return sse / static_cast<double>(dataset.size() * config.grid);
}

double evaluate(Checkpoint& checkpoint, const Dataset& dataset, std::size_t batch_size) {
  return evaluate(checkpoint.train.variant, checkpoint.params, checkpoint.model, dataset, batch_size);
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& cfg, const Dataset& train_set,
                  const TrainOptions& options) {
  model_config.validate();
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.model = model_config;
  ckpt.train = cfg;
  ckpt.params = init_params(model_config, cfg.seed, cfg.dtype);
  Params& params = ckpt.params;
  const auto names = variant_parameters(params, cfg.variant);
  const bool with_charts = cfg.variant == Variant::multimodal;
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);

  const auto start = std::chrono::steady_clock::now();
  auto log = [&](std::size_t epoch, const char* split, double mse) {
    double wall = 0.0;
    if (options.record_wall_time)
      wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.rows.push_back({epoch, split, mse, wall});
    if (options.on_row) options.on_row(result.log.rows.back());
  };
  auto log_test = [&](std::size_t epoch) {
    if (options.test)
      log(epoch, "test", evaluate(cfg.variant, params, model_config, *options.test, options.eval_batch_size));
  };

  log(0, "train", evaluate(cfg.variant, params, model_config, train_set, options.eval_batch_size));
  log_test(0);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    std::size_t elements = 0;
    std::size_t batch_no = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size, ++batch_no) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      const Batch batch = make_batch(train_set, std::span(order).subspan(s, e - s), model_config, cfg.dtype,
                                     with_charts);
      for (auto& [name, t] : params.tensors) t.zero_grad();
      double loss_value = 0.0;
      bool have_loss = false;
      try {
        const Tensor loss =
            mse_loss(forward(cfg.variant, batch.raw, batch.charts, params, model_config, true), batch.target);
        loss_value = loss.item();
        have_loss = true;
        if (!std::isfinite(loss_value)) throw NumericError("loss is not finite");
        loss.backward();
      } catch (const NumericError& err) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " batch " << batch_no;
        if (have_loss) msg << " (loss " << loss_value << ")";
        else msg << " (forward pass)";
        msg << ": " << err.what();
        throw NumericError(msg.str());
      }
      sgd_step(params, names, cfg.lr);
      weighted += loss_value * static_cast<double>(batch.target.numel());
      elements += batch.target.numel();
    }
    log(epoch, "train", weighted / static_cast<double>(elements));
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) log_test(epoch);
  }
  for (auto& [name, t] : params.tensors) t.zero_grad();
  ckpt.epoch = cfg.epochs;
  std::ostringstream state;
  state << rng;
  ckpt.rng_state = state.str();
  return result;
}

}  // namespace qdf
