#include "qdf/model/model.hpp"

#include <cmath>
#include <random>

#include "qdf/errors.hpp"

namespace qdf {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::multimodal: return "multimodal";
    case Variant::mlp_only: return "mlp_only";
    case Variant::mlp_attn: return "mlp_attn";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::multimodal, Variant::mlp_only, Variant::mlp_attn})
    if (variant_name(v) == name) return v;
  throw ValidationError("unknown variant '" + name + "' (expected multimodal, mlp_only or mlp_attn)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("model config: " + what); };
  if (raw_length == 0 || mlp_layers == 0 || mlp_hidden == 0 || d_model == 0 || heads == 0 || ffn_mult == 0 || grid == 0)
    fail("layer counts and widths must be >= 1");
  if (d_model % heads != 0)
    fail("d_model " + std::to_string(d_model) + " is not divisible by heads " + std::to_string(heads));
  if (conv_channels.empty()) fail("at least one conv stage is required");
  for (auto c : conv_channels)
    if (c == 0) fail("conv channel counts must be >= 1");
  if (chart_selection.empty()) fail("chart selection is empty");
  for (const auto& name : chart_selection) indicator_index(name);
  if (max_points < 2) fail("max_points must be >= 2");
  const std::size_t factor = std::size_t{1} << conv_channels.size();
  if (height == 0 || width == 0 || height % factor != 0 || width % factor != 0) {
    fail("resolution " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by 2^" +
         std::to_string(conv_channels.size()) + " for " + std::to_string(conv_channels.size()) +
         " pooling stages");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"raw_length", c.raw_length},   {"mlp_layers", c.mlp_layers},
          {"mlp_hidden", c.mlp_hidden},   {"d_model", c.d_model},
          {"conv_channels", c.conv_channels}, {"heads", c.heads},
          {"fusion_blocks", c.fusion_blocks}, {"ffn_mult", c.ffn_mult},
          {"grid", c.grid},               {"chart_selection", c.chart_selection},
          {"height", c.height},           {"width", c.width},
          {"max_points", c.max_points}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.raw_length = j.at("raw_length").get<std::size_t>();
    c.mlp_layers = j.at("mlp_layers").get<std::size_t>();
    c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    c.heads = j.at("heads").get<std::size_t>();
    c.fusion_blocks = j.at("fusion_blocks").get<std::size_t>();
    c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
    c.grid = j.at("grid").get<std::size_t>();
    c.chart_selection = j.at("chart_selection").get<std::vector<std::string>>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.max_points = j.at("max_points").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

const Tensor& Params::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& Params::buffer(const std::string& name) const {
  const auto it = buffers.find(name);
  if (it == buffers.end()) throw ValidationError("unknown buffer '" + name + "'");
  return it->second;
}

DType Params::dtype() const {
  if (tensors.empty()) throw ValidationError("empty parameter set");
  return tensors.begin()->second.dtype();
}

Params Params::clone() const {
  Params out;
  for (const auto& [name, t] : tensors) {
    Tensor copy = t.detach();
    copy.set_requires_grad(t.requires_grad());
    out.tensors.emplace(name, copy);
  }
  for (const auto& [name, t] : buffers) out.buffers.emplace(name, t.detach());
  return out;
}

namespace {

class ParamBuilder {
 public:
  ParamBuilder(Params& p, std::uint64_t seed, DType dtype) : params_(p), rng_(seed), dtype_(dtype) {}

  void uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng_);
    add(name, Tensor::from_values(std::move(shape), v, dtype_));
  }
  void constant(const std::string& name, Shape shape, double value) {
    add(name, Tensor::full(std::move(shape), value, dtype_));
  }
  void buffer(const std::string& name, Shape shape, double value) {
    params_.buffers.emplace(name, Tensor::full(std::move(shape), value, dtype_));
  }
  void linear(const std::string& prefix, std::size_t in, std::size_t out) {
    uniform(prefix + ".weight", {in, out}, in);
    constant(prefix + ".bias", {out}, 0.0);
  }

 private:
  void add(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    if (!params_.tensors.emplace(name, t).second) throw ValidationError("duplicate parameter '" + name + "'");
  }
  Params& params_;
  std::mt19937_64 rng_;
  DType dtype_;
};

std::string idx(std::size_t i) { return std::to_string(i); }

}  // namespace

Params init_params(const ModelConfig& config, std::uint64_t seed, DType dtype) {
  config.validate();
  Params p;
  ParamBuilder b(p, seed, dtype);
  const std::size_t d = config.d_model;

  for (std::size_t i = 0; i < config.mlp_layers; ++i) {
    const std::size_t in = i == 0 ? config.raw_length : config.mlp_hidden;
    const std::size_t out = i + 1 == config.mlp_layers ? d : config.mlp_hidden;
    b.linear("raw.mlp." + idx(i), in, out);
  }
  b.constant("raw.norm.gamma", {d}, 1.0);
  b.constant("raw.norm.beta", {d}, 0.0);
  for (const char* w : {"wq", "wk", "wv"}) b.uniform(std::string("raw.attn.") + w, {d, d}, d);

  std::size_t channels = config.charts();
  for (std::size_t s = 0; s < config.conv_channels.size(); ++s) {
    const std::size_t f = config.conv_channels[s];
    const std::string pre = "vis.conv." + idx(s);
    b.uniform(pre + ".weight", {f, channels, 3, 3}, channels * 9);
    b.constant(pre + ".bias", {f}, 0.0);
    b.constant("vis.bn." + idx(s) + ".gamma", {f}, 1.0);
    b.constant("vis.bn." + idx(s) + ".beta", {f}, 0.0);
    b.buffer("vis.bn." + idx(s) + ".running_mean", {f}, 0.0);
    b.buffer("vis.bn." + idx(s) + ".running_var", {f}, 1.0);
    channels = f;
  }
  b.linear("vis.proj", channels, d);
  for (const char* w : {"wq", "wk", "wv"}) b.uniform(std::string("vis.attn.") + w, {d, d}, d);

  for (std::size_t l = 0; l < config.fusion_blocks; ++l) {
    const std::string pre = "fusion." + idx(l);
    b.constant(pre + ".ln1.gamma", {d}, 1.0);
    b.constant(pre + ".ln1.beta", {d}, 0.0);
    // Keys carry no bias: it would shift every score of a query row equally
    // and cancel in the softmax.
    b.linear(pre + ".attn.q", d, d);
    b.uniform(pre + ".attn.k.weight", {d, d}, d);
    b.linear(pre + ".attn.v", d, d);
    b.linear(pre + ".attn.o", d, d);
    b.constant(pre + ".ln2.gamma", {d}, 1.0);
    b.constant(pre + ".ln2.beta", {d}, 0.0);
    b.linear(pre + ".ffn1", d, d * config.ffn_mult);
    b.linear(pre + ".ffn2", d * config.ffn_mult, d);
  }
  b.linear("head", d, config.grid);
  return p;
}

std::vector<std::string> variant_parameters(const Params& params, Variant variant) {
  std::vector<std::string> names;
  for (const auto& [name, t] : params.tensors) {
    (void)t;
    const bool head = name.rfind("head.", 0) == 0;
    const bool mlp = name.rfind("raw.mlp.", 0) == 0;
    const bool raw = name.rfind("raw.", 0) == 0;
    bool used = true;
    if (variant == Variant::mlp_only) used = head || mlp;
    if (variant == Variant::mlp_attn) used = head || raw;
    if (used) names.push_back(name);
  }
  return names;
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.dim() != 3 || k.dim() != 3 || q.extent(0) != k.extent(0) || q.extent(2) != k.extent(2)) {
    throw DimensionError("attention: incompatible Q " + shape_str(q.shape()) + " and K " +
                         shape_str(k.shape()));
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.extent(2)));
  return softmax(scale(bmm(q, transpose_last2(k)), inv), 2);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.dim() != 3 || v.extent(0) != k.extent(0) || v.extent(1) != k.extent(1)) {
    throw DimensionError("attention: V " + shape_str(v.shape()) + " does not match K " + shape_str(k.shape()));
  }
  return bmm(attention_weights(q, k), v);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.dim() == 2) return add_bias(matmul(x, weight), bias);
  Shape shape = x.shape();
  const std::size_t in = shape.back();
  const Tensor flat = reshape(x, {x.numel() / in, in});
  shape.back() = weight.extent(1);
  return reshape(add_bias(matmul(flat, weight), bias), shape);
}

namespace {

Tensor project(const Tensor& x, const Tensor& weight) {
  const Shape shape = x.shape();
  const std::size_t in = shape.back();
  Shape out = shape;
  out.back() = weight.extent(1);
  return reshape(matmul(reshape(x, {x.numel() / in, in}), weight), out);
}

Tensor token_attention(const Tensor& tokens, const Params& p, const std::string& prefix) {
  return attention(project(tokens, p.at(prefix + ".wq")), project(tokens, p.at(prefix + ".wk")),
                   project(tokens, p.at(prefix + ".wv")));
}

Tensor as_token(const Tensor& x) { return reshape(x, {x.extent(0), 1, x.extent(1)}); }

void check_input(const Tensor& x, const Shape& tail, const char* what) {
  bool ok = x.defined() && x.dim() == tail.size() + 1;
  for (std::size_t i = 0; ok && i < tail.size(); ++i) ok = x.extent(i + 1) == tail[i];
  if (!ok) {
    throw DimensionError(std::string(what) + ": expected [B x " + shape_str(tail) + "], got " +
                         (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
  }
}

// Splits [B x T x d] into [B*h x T x d/h] and back.
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.extent(0), t = x.extent(1), d = x.extent(2);
  return reshape(permute(reshape(x, {b, t, heads, d / heads}), {0, 2, 1, 3}), {b * heads, t, d / heads});
}

Tensor merge_heads(const Tensor& x, std::size_t batch, std::size_t heads) {
  const std::size_t t = x.extent(1), dh = x.extent(2);
  return reshape(permute(reshape(x, {batch, heads, t, dh}), {0, 2, 1, 3}), {batch, t, heads * dh});
}

}  // namespace

Tensor raw_mlp(const Tensor& raw, const Params& p, const ModelConfig& config) {
  check_input(raw, {config.raw_length}, "raw_branch");
  Tensor h = raw;
  for (std::size_t i = 0; i < config.mlp_layers; ++i) {
    const std::string pre = "raw.mlp." + idx(i);
    h = sigmoid(linear(h, p.at(pre + ".weight"), p.at(pre + ".bias")));
  }
  return h;
}

Tensor raw_branch(const Tensor& raw, const Params& p, const ModelConfig& config) {
  const Tensor h = layer_norm(raw_mlp(raw, p, config), p.at("raw.norm.gamma"), p.at("raw.norm.beta"));
  return token_attention(as_token(h), p, "raw.attn");
}

Tensor vision_feature_map(const Tensor& charts, Params& p, const ModelConfig& config, bool training) {
  check_input(charts, {config.charts(), config.height, config.width}, "vision_branch");
  Tensor h = charts;
  for (std::size_t s = 0; s < config.conv_channels.size(); ++s) {
    const std::string conv = "vis.conv." + idx(s);
    const std::string bn = "vis.bn." + idx(s);
    h = conv2d(h, p.at(conv + ".weight"), p.at(conv + ".bias"), 1, 1);
    BatchNormState state{p.buffer(bn + ".running_mean"), p.buffer(bn + ".running_var")};
    h = batchnorm2d(h, p.at(bn + ".gamma"), p.at(bn + ".beta"), state, BatchNormOptions{.training = training});
    h = maxpool2d(relu(h), 2, 2);
  }
  return h;
}

Tensor vision_features(const Tensor& charts, Params& p, const ModelConfig& config, bool training) {
  return global_avgpool(vision_feature_map(charts, p, config, training));
}

Tensor vision_branch(const Tensor& charts, Params& p, const ModelConfig& config, bool training) {
  const Tensor feat = vision_features(charts, p, config, training);
  const Tensor proj = linear(feat, p.at("vis.proj.weight"), p.at("vis.proj.bias"));
  return token_attention(as_token(proj), p, "vis.attn");
}

namespace {

struct HeadProjections {
  Tensor q, k, v;
};

HeadProjections fusion_qkv(const Tensor& x, const Params& p, const ModelConfig& config, std::size_t block) {
  const std::string pre = "fusion." + idx(block) + ".attn.";
  auto proj = [&](const char* w) {
    return split_heads(linear(x, p.at(pre + w + ".weight"), p.at(pre + w + ".bias")), config.heads);
  };
  return {proj("q"), split_heads(project(x, p.at(pre + "k.weight")), config.heads), proj("v")};
}

}  // namespace

Tensor fusion_attention_maps(const Tensor& x, const Params& p, const ModelConfig& config, std::size_t block) {
  const auto h = fusion_qkv(x, p, config, block);
  return attention_weights(h.q, h.k);
}

Tensor fusion_attention(const Tensor& x, const Params& p, const ModelConfig& config, std::size_t block) {
  const auto h = fusion_qkv(x, p, config, block);
  const Tensor merged = merge_heads(attention(h.q, h.k, h.v), x.extent(0), config.heads);
  const std::string pre = "fusion." + idx(block) + ".attn.o";
  return linear(merged, p.at(pre + ".weight"), p.at(pre + ".bias"));
}

Tensor fusion_transformer(const Tensor& output1, const Tensor& output2, const Params& p,
                          const ModelConfig& config) {
  check_input(output1, {1, config.d_model}, "fusion_transformer output1");
  check_input(output2, {1, config.d_model}, "fusion_transformer output2");
  if (output1.extent(0) != output2.extent(0)) throw DimensionError("fusion_transformer: batch sizes differ");
  Tensor x = concat({output1, output2}, 1);
  for (std::size_t l = 0; l < config.fusion_blocks; ++l) {
    const std::string pre = "fusion." + idx(l);
    Tensor h = layer_norm(x, p.at(pre + ".ln1.gamma"), p.at(pre + ".ln1.beta"));
    x = add(x, fusion_attention(h, p, config, l));
    h = layer_norm(x, p.at(pre + ".ln2.gamma"), p.at(pre + ".ln2.beta"));
    h = relu(linear(h, p.at(pre + ".ffn1.weight"), p.at(pre + ".ffn1.bias")));
    x = add(x, linear(h, p.at(pre + ".ffn2.weight"), p.at(pre + ".ffn2.bias")));
  }
  return x;
}

Tensor regression_head(const Tensor& features, const Params& p) {
  return linear(features, p.at("head.weight"), p.at("head.bias"));
}

Tensor predict(const Tensor& raw, const Tensor& charts, Params& p, const ModelConfig& config, bool training) {
  const Tensor fused =
      fusion_transformer(raw_branch(raw, p, config), vision_branch(charts, p, config, training), p, config);
  return regression_head(mean(fused, 1), p);
}

Tensor predict_mlp_only(const Tensor& raw, const Params& p, const ModelConfig& config) {
  return regression_head(raw_mlp(raw, p, config), p);
}

Tensor predict_mlp_attn(const Tensor& raw, const Params& p, const ModelConfig& config) {
  const Tensor token = raw_branch(raw, p, config);
  return regression_head(reshape(token, {token.extent(0), config.d_model}), p);
}

Tensor forward(Variant variant, const Tensor& raw, const Tensor& charts, Params& p, const ModelConfig& config,
               bool training) {
  switch (variant) {
    case Variant::multimodal: return predict(raw, charts, p, config, training);
    case Variant::mlp_only: return predict_mlp_only(raw, p, config);
    case Variant::mlp_attn: return predict_mlp_attn(raw, p, config);
  }
  throw ValidationError("unknown variant");
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  const Tensor diff = sub(pred, target);
  return mean(mul(diff, diff));
}

}  // namespace qdf
