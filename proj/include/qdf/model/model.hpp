#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdf/data/record.hpp"
#include "qdf/tensor/ops.hpp"
#include "qdf/tensor/tensor.hpp"

namespace qdf {

/// multimodal: both branches and fusion. mlp_only: raw MLP straight into the
/// head. mlp_attn: raw branch (MLP, norm, attention) into the head.
enum class Variant { multimodal, mlp_only, mlp_attn };

std::string variant_name(Variant v);
/// Throws ValidationError for unknown names.
Variant parse_variant(const std::string& name);

struct ModelConfig {
  std::size_t raw_length = 1024;  // n
  std::size_t mlp_layers = 3;
  std::size_t mlp_hidden = 256;
  std::size_t d_model = 128;
  std::vector<std::size_t> conv_channels = {16, 32, 64, 128};  // one entry per conv stage
  std::size_t heads = 4;
  std::size_t fusion_blocks = 2;  // L; 0 leaves the two tokens untouched
  std::size_t ffn_mult = 4;
  std::size_t grid = 101;  // G
  std::vector<std::string> chart_selection = default_chart_selection();  // K = size()
  std::size_t height = 224;
  std::size_t width = 224;
  std::size_t max_points = 100;  // chart sampling cap M

  std::size_t charts() const { return chart_selection.size(); }
  /// Throws ValidationError on zero counts, d_model % heads != 0, or a
  /// resolution that the conv stages cannot halve cleanly.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named model tensors. `tensors` holds the learnable parameters and
/// `buffers` the batch-norm running statistics.
struct Params {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, Tensor> buffers;

  /// Throws ValidationError for unknown names.
  const Tensor& at(const std::string& name) const;
  const Tensor& buffer(const std::string& name) const;
  DType dtype() const;
  /// Deep copy; the result shares no storage with *this.
  Params clone() const;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases and norm shifts 0,
/// norm scales 1, running mean 0 and running variance 1. Deterministic in seed.
Params init_params(const ModelConfig& config, std::uint64_t seed, DType dtype = DType::f64);

/// Names of the parameters that `variant` reads, in map order.
std::vector<std::string> variant_parameters(const Params& params, Variant variant);

/// softmax(Q K^T / sqrt(d)) over the last axis. Q[B x T x d], K[B x T' x d] -> [B x T x T'].
Tensor attention_weights(const Tensor& q, const Tensor& k);
/// attention_weights(Q, K) V -> [B x T x d]
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// x[... x in] W[in x out] + b[out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// raw[B x n] -> sigmoid MLP output [B x d_model]
Tensor raw_mlp(const Tensor& raw, const Params& params, const ModelConfig& config);
/// raw[B x n] -> [B x 1 x d_model]
Tensor raw_branch(const Tensor& raw, const Params& params, const ModelConfig& config);

/// Output of the last conv stage, [B x C_last x H/2^S x W/2^S].
Tensor vision_feature_map(const Tensor& charts, Params& params, const ModelConfig& config, bool training);
/// Global-average-pooled conv features [B x C_last] before the projection.
/// `training` selects batch statistics (and running-stat updates) in batch norm.
Tensor vision_features(const Tensor& charts, Params& params, const ModelConfig& config, bool training);
/// charts[B x K x H x W] -> [B x 1 x d_model]
Tensor vision_branch(const Tensor& charts, Params& params, const ModelConfig& config, bool training);

/// Multi-head self-attention sublayer of fusion block `block` on x[B x T x d], without residual.
Tensor fusion_attention(const Tensor& x, const Params& params, const ModelConfig& config,
                        std::size_t block);
/// Per-head attention maps [B*heads x T x T] of that sublayer, for inspection.
Tensor fusion_attention_maps(const Tensor& x, const Params& params, const ModelConfig& config,
                             std::size_t block);
/// [B x 1 x d], [B x 1 x d] -> [B x 2 x d] through the pre-norm residual blocks.
Tensor fusion_transformer(const Tensor& output1, const Tensor& output2, const Params& params,
                          const ModelConfig& config);

/// tokens[B x d] -> [B x G]
Tensor regression_head(const Tensor& features, const Params& params);

Tensor predict(const Tensor& raw, const Tensor& charts, Params& params, const ModelConfig& config,
               bool training);
Tensor predict_mlp_only(const Tensor& raw, const Params& params, const ModelConfig& config);
Tensor predict_mlp_attn(const Tensor& raw, const Params& params, const ModelConfig& config);
/// Dispatches on variant; `charts` is ignored by the raw-only variants.
Tensor forward(Variant variant, const Tensor& raw, const Tensor& charts, Params& params,
               const ModelConfig& config, bool training);

/// Mean over all elements of (pred - target)^2.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace qdf
