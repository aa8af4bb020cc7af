#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "qdf/errors.hpp"
#include "qdf/model/model.hpp"
#include "qdf/tensor/grad_check.hpp"
#include "support/oracles.hpp"

namespace {

using namespace qdf;
using qdf::testing::random_tensor;

ModelConfig tiny_config() {
  ModelConfig c;
  c.raw_length = 32;
  c.mlp_layers = 2;
  c.mlp_hidden = 8;
  c.d_model = 8;
  c.conv_channels = {3, 4};
  c.heads = 2;
  c.fusion_blocks = 1;
  c.ffn_mult = 2;
  c.grid = 5;
  c.chart_selection = {"ind_065", "ind_066"};
  c.height = 16;
  c.width = 16;
  return c;
}

Tensor random_charts(std::size_t batch, const ModelConfig& c, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(0.2);
  std::vector<double> v(batch * c.charts() * c.height * c.width);
  for (auto& x : v) x = bit(rng) ? 1.0 : 0.0;
  return Tensor::from_values({batch, c.charts(), c.height, c.width}, v);
}

void zero_fusion_blocks(Params& p) {
  for (auto& [name, t] : p.tensors)
    if (name.rfind("fusion.", 0) == 0)
      for (std::size_t i = 0; i < t.numel(); ++i) t.set(i, 0.0);
}

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW(ModelConfig{}.validate());
  ModelConfig c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.height = 18;  // not divisible by 2^2
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.chart_selection = {"nope"};
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.mlp_layers = 0;
  EXPECT_THROW(init_params(c, 0), ValidationError);
}

TEST(ModelConfig, JsonRoundTrip) {
  const ModelConfig c = tiny_config();
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_EQ(model_config_from_json(nlohmann::json::parse(to_json(ModelConfig{}).dump())), ModelConfig{});
  EXPECT_THROW(model_config_from_json(nlohmann::json::object()), ValidationError);
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::multimodal, Variant::mlp_only, Variant::mlp_attn})
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("vision_only"), ValidationError);
}

TEST(InitParams, DeterministicAndZeroBiases) {
  const ModelConfig c = tiny_config();
  const Params a = init_params(c, 4), b = init_params(c, 4), other = init_params(c, 5);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (const auto& [name, t] : a.tensors) {
    EXPECT_EQ(t.values(), b.at(name).values()) << name;
    EXPECT_TRUE(t.requires_grad()) << name;
    if (name.ends_with(".bias") || name.ends_with(".beta")) {
      for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
    }
    if (name.ends_with(".gamma")) {
      for (double v : t.values()) EXPECT_EQ(v, 1.0) << name;
    }
  }
  EXPECT_NE(a.at("head.weight").values(), other.at("head.weight").values());
  for (double v : a.buffer("vis.bn.0.running_var").values()) EXPECT_EQ(v, 1.0);
}

TEST(InitParams, UniformBoundsAndMean) {
  ModelConfig c = tiny_config();
  c.raw_length = 256;
  c.mlp_hidden = 40;  // 256 x 40 = 10240 draws with fan_in 256
  const Params p = init_params(c, 9);
  const auto w = p.at("raw.mlp.0.weight").values();
  ASSERT_EQ(w.size(), 10240u);
  const double bound = 1.0 / 16.0;
  double sum = 0.0;
  for (double v : w) {
    EXPECT_LE(std::abs(v), bound);
    sum += v;
  }
  const double sigma_of_mean = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LT(std::abs(sum / static_cast<double>(w.size())), 3.0 * sigma_of_mean);
}

TEST(InitParams, CloneIsIndependent) {
  const Params p = init_params(tiny_config(), 1);
  Params q = p.clone();
  q.tensors.at("head.bias").set(0, 7.0);
  EXPECT_EQ(p.at("head.bias").at(0), 0.0);
  EXPECT_FALSE(q.at("head.bias").same_storage(p.at("head.bias")));
}

TEST(VariantParameters, SelectsBranches) {
  const Params p = init_params(tiny_config(), 1);
  for (const auto& n : variant_parameters(p, Variant::mlp_only))
    EXPECT_TRUE(n.rfind("raw.mlp.", 0) == 0 || n.rfind("head.", 0) == 0) << n;
  const auto attn = variant_parameters(p, Variant::mlp_attn);
  EXPECT_NE(std::find(attn.begin(), attn.end(), "raw.attn.wv"), attn.end());
  EXPECT_EQ(std::find(attn.begin(), attn.end(), "vis.proj.weight"), attn.end());
  EXPECT_EQ(variant_parameters(p, Variant::multimodal).size(), p.tensors.size());
}

TEST(Attention, ZeroQueryAveragesValues) {
  std::mt19937_64 rng(1);
  const Tensor q = Tensor::zeros({2, 3, 4});
  const Tensor k = random_tensor({2, 5, 4}, rng);
  const Tensor v = random_tensor({2, 5, 4}, rng);
  const auto out = attention(q, k, v).values();
  const auto vv = v.values();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 4; ++j) {
        double m = 0.0;
        for (std::size_t s = 0; s < 5; ++s) m += vv[(b * 5 + s) * 4 + j];
        EXPECT_NEAR(out[(b * 3 + t) * 4 + j], m / 5.0, 1e-14);
      }
}

TEST(Attention, SingleTokenReturnsValue) {
  std::mt19937_64 rng(2);
  const Tensor q = random_tensor({3, 1, 6}, rng), k = random_tensor({3, 1, 6}, rng);
  const Tensor v = random_tensor({3, 1, 6}, rng);
  EXPECT_EQ(attention(q, k, v).values(), v.values());
}

TEST(Attention, MatchesNaiveLoops) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(1, 6);
    const std::size_t b = ext(rng), t = ext(rng), t2 = ext(rng), d = ext(rng);
    const Tensor q = random_tensor({b, t, d}, rng), k = random_tensor({b, t2, d}, rng);
    const Tensor v = random_tensor({b, t2, d}, rng);
    const auto expect = qdf::testing::naive_attention(q.values(), k.values(), v.values(), b, t, t2, d);
    EXPECT_LE(qdf::testing::max_abs_diff(attention(q, k, v).values(), expect), 1e-10);
  }
  EXPECT_THROW(attention(Tensor::zeros({1, 2, 3}), Tensor::zeros({1, 2, 4}), Tensor::zeros({1, 2, 4})),
               DimensionError);
}

TEST(RawBranch, ShapeRangeAndLiveGradient) {
  const ModelConfig c = tiny_config();
  const Params p = init_params(c, 2);
  std::mt19937_64 rng(4);
  const Tensor raw = random_tensor({3, c.raw_length}, rng, 0.0, 1.0);
  const Tensor h = raw_mlp(raw, p, c);
  for (double v : h.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const Tensor out = raw_branch(raw, p, c);
  EXPECT_EQ(out.shape(), (Shape{3, 1, c.d_model}));
  sum(mul(out, out)).backward();
  double norm = 0.0;
  for (double g : p.at("raw.mlp.0.weight").grad_values()) norm += g * g;
  EXPECT_GT(norm, 0.0);
  EXPECT_THROW(raw_branch(Tensor::zeros({3, 31}), p, c), DimensionError);
}

TEST(VisionBranch, FeatureMapAt224) {
  ModelConfig c;
  c.chart_selection = {"ind_100"};
  Params p = init_params(c, 1);
  std::mt19937_64 rng(1);
  const Tensor charts = random_charts(1, c, rng);
  const Tensor fmap = vision_feature_map(charts, p, c, false);
  EXPECT_EQ(fmap.shape(), (Shape{1, 128, 14, 14}));
}

TEST(VisionBranch, ZeroChartsGiveZeroFeatures) {
  const ModelConfig c = tiny_config();
  Params p = init_params(c, 6);
  const Tensor zeros = Tensor::zeros({2, c.charts(), c.height, c.width});
  for (double v : vision_features(zeros, p, c, false).values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(vision_branch(zeros, p, c, false).shape(), (Shape{2, 1, c.d_model}));
  EXPECT_THROW(vision_branch(Tensor::zeros({2, 3, 16, 16}), p, c, false), DimensionError);
}

TEST(VisionBranch, TrainingUpdatesRunningStats) {
  const ModelConfig c = tiny_config();
  Params p = init_params(c, 6);
  std::mt19937_64 rng(2);
  const Tensor charts = random_charts(4, c, rng);
  const auto before = p.buffer("vis.bn.0.running_mean").values();
  vision_branch(charts, p, c, false);
  EXPECT_EQ(p.buffer("vis.bn.0.running_mean").values(), before);
  vision_branch(charts, p, c, true);
  EXPECT_NE(p.buffer("vis.bn.0.running_mean").values(), before);
}

TEST(Fusion, ZeroBlocksAreExactIdentity) {
  ModelConfig c = tiny_config();
  c.fusion_blocks = 3;
  Params p = init_params(c, 7);
  zero_fusion_blocks(p);
  std::mt19937_64 rng(8);
  const Tensor o1 = random_tensor({2, 1, c.d_model}, rng), o2 = random_tensor({2, 1, c.d_model}, rng);
  const auto out = fusion_transformer(o1, o2, p, c).values();
  const auto expect = concat({o1, o2}, 1).values();
  EXPECT_EQ(out, expect);
  // Swapping the inputs swaps the tokens.
  const auto swapped = fusion_transformer(o2, o1, p, c).values();
  EXPECT_EQ(swapped, concat({o2, o1}, 1).values());
}

TEST(Fusion, NoBlocksIsConcatenation) {
  ModelConfig c = tiny_config();
  c.fusion_blocks = 0;
  const Params p = init_params(c, 7);
  std::mt19937_64 rng(9);
  const Tensor o1 = random_tensor({3, 1, c.d_model}, rng), o2 = random_tensor({3, 1, c.d_model}, rng);
  EXPECT_EQ(fusion_transformer(o1, o2, p, c).values(), concat({o1, o2}, 1).values());
  EXPECT_THROW(fusion_transformer(o1, Tensor::zeros({3, 1, 4}), p, c), DimensionError);
}

TEST(Fusion, AttentionRowsSumToOne) {
  ModelConfig c = tiny_config();
  c.heads = 4;
  const Params p = init_params(c, 10);
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor({3, 2, c.d_model}, rng, -2.0, 2.0);
  const Tensor maps = fusion_attention_maps(x, p, c, 0);
  ASSERT_EQ(maps.shape(), (Shape{12, 2, 2}));
  const auto w = maps.values();
  for (std::size_t r = 0; r < 24; ++r) EXPECT_NEAR(w[2 * r] + w[2 * r + 1], 1.0, 1e-6);
}

TEST(Predict, ShapesAndBatchIndependenceInEval) {
  const ModelConfig c = tiny_config();
  Params p = init_params(c, 12);
  std::mt19937_64 rng(13);
  const Tensor raw1 = random_tensor({1, c.raw_length}, rng, 0.0, 1.0);
  const Tensor ch1 = random_charts(1, c, rng);
  const Tensor raw = concat({raw1, raw1}, 0), charts = concat({ch1, ch1}, 0);
  const auto out = predict(raw, charts, p, c, false);
  ASSERT_EQ(out.shape(), (Shape{2, c.grid}));
  const auto v = out.values();
  for (std::size_t g = 0; g < c.grid; ++g) EXPECT_EQ(v[g], v[c.grid + g]);
  EXPECT_EQ(predict_mlp_only(raw, p, c).shape(), (Shape{2, c.grid}));
  EXPECT_EQ(predict_mlp_attn(raw, p, c).shape(), (Shape{2, c.grid}));
}

TEST(Predict, BothModalitiesReceiveGradient) {
  const ModelConfig c = tiny_config();
  Params p = init_params(c, 14);
  std::mt19937_64 rng(15);
  Tensor raw = random_tensor({2, c.raw_length}, rng, 0.0, 1.0);
  Tensor charts = random_charts(2, c, rng);
  raw.set_requires_grad();
  charts.set_requires_grad();
  sum(predict(raw, charts, p, c, false)).backward();
  double gr = 0.0, gc = 0.0;
  for (double g : raw.grad_values()) gr += g * g;
  for (double g : charts.grad_values()) gc += g * g;
  EXPECT_GT(gr, 0.0);
  EXPECT_GT(gc, 0.0);
}

TEST(Predict, MlpAttnEqualsFirstFusedTokenWithoutBlocks) {
  ModelConfig c = tiny_config();
  c.fusion_blocks = 0;
  Params p = init_params(c, 16);
  std::mt19937_64 rng(17);
  const Tensor raw = random_tensor({3, c.raw_length}, rng, 0.0, 1.0);
  const Tensor vision_token = Tensor::zeros({3, 1, c.d_model});
  const Tensor fused = fusion_transformer(raw_branch(raw, p, c), vision_token, p, c);
  const Tensor first = reshape(slice(fused, 1, 0, 1), {3, c.d_model});
  EXPECT_EQ(regression_head(first, p).values(), predict_mlp_attn(raw, p, c).values());
}

TEST(MseLoss, Examples) {
  EXPECT_EQ(mse_loss(Tensor::from_values({1, 2}, {2.0, 5.0}), Tensor::from_values({1, 2}, {1.0, 3.0})).item(),
            2.5);
  EXPECT_EQ(mse_loss(Tensor::full({2, 3}, 1.0), Tensor::zeros({2, 3})).item(), 1.0);
  const Tensor x = Tensor::from_values({1, 3}, {0.1, 0.2, 0.3});
  EXPECT_EQ(mse_loss(x, x).item(), 0.0);
  EXPECT_THROW(mse_loss(Tensor::zeros({1, 3}), Tensor::zeros({3, 1})), DimensionError);
}

class FullModelGradient : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    params = init_params(config, seed);
    std::mt19937_64 rng(seed + 100);
    raw = random_tensor({2, config.raw_length}, rng, 0.0, 1.0);
    // Continuous pixels keep pre-activations off the ReLU kink; binary charts
    // with zero biases leave many conv outputs at exactly 0.
    charts = random_tensor({2, config.charts(), config.height, config.width}, rng, 0.0, 1.0);
    target = random_tensor({2, config.grid}, rng, 1.0, 4.0);
  }

  GradCheckResult check(bool training, const std::function<bool(const std::string&)>& include) {
    names.clear();
    std::vector<Tensor> inputs;
    for (const auto& [name, t] : params.tensors) {
      if (!include(name)) continue;
      names.push_back(name);
      inputs.push_back(t);
    }
    const auto f = [&](const std::vector<Tensor>&) {
      return mse_loss(predict(raw, charts, params, config, training), target);
    };
    return grad_check(f, inputs, 1e-5);
  }

  ModelConfig config = tiny_config();
  Params params;
  Tensor raw, charts, target;
  std::vector<std::string> names;
};

bool is_conv_bias(const std::string& name) {
  return name.rfind("vis.conv.", 0) == 0 && name.ends_with(".bias");
}

TEST_P(FullModelGradient, EveryParameterInEvalMode) {
  const auto r = check(false, [](const std::string&) { return true; });
  EXPECT_LT(r.max_relative_error, 1e-4) << names[r.worst_input] << "[" << r.worst_element
                                        << "] analytic=" << r.analytic << " numeric=" << r.numeric;
}

TEST_P(FullModelGradient, TrainingModeBatchStatistics) {
  const auto r = check(true, [](const std::string& n) { return !is_conv_bias(n); });
  EXPECT_LT(r.max_relative_error, 1e-4) << names[r.worst_input] << "[" << r.worst_element
                                        << "] analytic=" << r.analytic << " numeric=" << r.numeric;
  // Batch statistics cancel a per-channel shift, so biases feeding batch norm
  // have an exactly zero gradient in training mode.
  for (auto& [name, t] : params.tensors) t.zero_grad();
  mse_loss(predict(raw, charts, params, config, true), target).backward();
  for (const auto& [name, t] : params.tensors)
    if (is_conv_bias(name)) {
      for (double g : t.grad_values()) EXPECT_LT(std::abs(g), 1e-12) << name;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, FullModelGradient, ::testing::Values(1, 2, 3, 4, 5));

}  // namespace
