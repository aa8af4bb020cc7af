#include "qdf/cli/grad_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "qdf/errors.hpp"
#include "qdf/model/model.hpp"
#include "qdf/tensor/grad_check.hpp"
#include "qdf/tensor/ops.hpp"

namespace qdf {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = dist(rng);
  return Tensor::from_values(std::move(shape), v);
}

// A random linear functional keeps every output element's gradient distinct.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

Tensor faulty_sigmoid(const Tensor& x) {
  return map_elementwise(
      x, "sigmoid_faulty", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y) * 1.25; });
}

ModelConfig suite_model() {
  ModelConfig c;
  c.raw_length = 24;
  c.mlp_layers = 2;
  c.mlp_hidden = 6;
  c.d_model = 8;
  c.conv_channels = {2, 3};
  c.heads = 2;
  c.fusion_blocks = 1;
  c.ffn_mult = 2;
  c.grid = 4;
  c.chart_selection = {"ind_065", "ind_066"};
  c.height = 8;
  c.width = 8;
  return c;
}

struct Case {
  std::string op;
  ScalarFunction f;
  std::vector<Tensor> inputs;
};

std::vector<Case> build_cases(std::uint64_t seed, const GradSuiteOptions& options) {
  std::mt19937_64 rng(seed);
  const std::size_t m = 2 + seed % 3, n = 3 + seed % 2;
  const bool bad_sigmoid = options.inject_fault == "sigmoid";
  auto ws = [seed](const Tensor& y) { return weighted_sum(y, seed); };
  std::vector<Case> cases;
  auto add_case = [&](std::string op, ScalarFunction f, std::vector<Tensor> in) {
    cases.push_back({std::move(op), std::move(f), std::move(in)});
  };

  add_case("add", [ws](const auto& in) { return ws(add(in[0], in[1])); },
           {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});
  add_case("sub", [ws](const auto& in) { return ws(sub(in[0], in[1])); },
           {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});
  add_case("mul", [ws](const auto& in) { return ws(mul(in[0], in[1])); },
           {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});
  add_case("scale", [ws](const auto& in) { return ws(scale(in[0], -1.7)); }, {random_tensor({m, n}, rng)});
  add_case("add_bias", [ws](const auto& in) { return ws(add_bias(in[0], in[1])); },
           {random_tensor({2, m, n}, rng), random_tensor({n}, rng)});
  add_case("matmul", [ws](const auto& in) { return ws(matmul(in[0], in[1])); },
           {random_tensor({m, n}, rng), random_tensor({n, m + 1}, rng)});
  add_case("bmm", [ws](const auto& in) { return ws(bmm(in[0], in[1])); },
           {random_tensor({2, m, n}, rng), random_tensor({2, n, 3}, rng)});
  add_case("transpose_last2", [ws](const auto& in) { return ws(transpose_last2(in[0])); },
           {random_tensor({2, m, n}, rng)});
  add_case("permute", [ws](const auto& in) { return ws(permute(in[0], {2, 0, 1})); },
           {random_tensor({2, m, n}, rng)});
  add_case("reshape", [ws, m, n](const auto& in) { return ws(reshape(in[0], {n, m})); },
           {random_tensor({m, n}, rng)});
  add_case("concat", [ws](const auto& in) { return ws(concat({in[0], in[1]}, 1)); },
           {random_tensor({2, 1, n}, rng), random_tensor({2, 2, n}, rng)});
  add_case("slice", [ws](const auto& in) { return ws(slice(in[0], 1, 1, 2)); }, {random_tensor({m, 4}, rng)});
  add_case("sigmoid",
           [ws, bad_sigmoid](const auto& in) { return ws(bad_sigmoid ? faulty_sigmoid(in[0]) : sigmoid(in[0])); },
           {random_tensor({m, n}, rng, -4, 4)});
  add_case("relu", [ws](const auto& in) { return ws(relu(in[0])); }, {random_tensor({m, n}, rng)});
  add_case("softmax", [ws](const auto& in) { return ws(softmax(in[0], 1)); },
           {random_tensor({m, n, 2}, rng, -3, 3)});
  add_case("layer_norm", [ws](const auto& in) { return ws(layer_norm(in[0], in[1], in[2], 1e-5)); },
           {random_tensor({m, n}, rng), random_tensor({n}, rng), random_tensor({n}, rng)});
  add_case("sum", [ws](const auto& in) { return sum(in[0]); }, {random_tensor({m, n}, rng)});
  add_case("mean", [](const auto& in) { return mean(in[0]); }, {random_tensor({m, n}, rng)});
  add_case("mean_axis", [ws](const auto& in) { return ws(mean(in[0], 1)); }, {random_tensor({m, 3, n}, rng)});
  add_case("conv2d",
           [ws, seed](const auto& in) { return ws(conv2d(in[0], in[1], in[2], 1 + seed % 2, 1)); },
           {random_tensor({2, 2, 5, 6}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
  add_case("batchnorm2d_train",
           [ws](const auto& in) {
             BatchNormState st{Tensor::zeros({2}), Tensor::full({2}, 1.0)};
             return ws(batchnorm2d(in[0], in[1], in[2], st, {}));
           },
           {random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng), random_tensor({2}, rng)});
  add_case("batchnorm2d_eval",
           [ws](const auto& in) {
             BatchNormState st{Tensor::from_values({2}, {0.2, -0.1}), Tensor::from_values({2}, {0.5, 2.0})};
             return ws(batchnorm2d(in[0], in[1], in[2], st, {.training = false}));
           },
           {random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng), random_tensor({2}, rng)});
  add_case("maxpool2d", [ws](const auto& in) { return ws(maxpool2d(in[0], 2, 2)); },
           {random_tensor({2, 2, 4, 6}, rng)});
  add_case("global_avgpool", [ws](const auto& in) { return ws(global_avgpool(in[0])); },
           {random_tensor({2, 3, 3, 2}, rng)});
  add_case("attention", [ws](const auto& in) { return ws(attention(in[0], in[1], in[2])); },
           {random_tensor({2, 3, 4}, rng), random_tensor({2, 5, 4}, rng), random_tensor({2, 5, 3}, rng)});
  add_case("mse_loss", [](const auto& in) { return mse_loss(in[0], in[1]); },
           {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});

  // Full model: every parameter of the fusion network is an input.
  const ModelConfig config = suite_model();
  for (bool training : {false, true}) {
    auto params = std::make_shared<Params>(init_params(config, seed));
    std::vector<Tensor> inputs;
    for (const auto& [name, t] : params->tensors) {
      // Batch statistics cancel per-channel shifts, so conv biases have an
      // exactly zero gradient in training mode; eval mode covers them.
      if (training && name.rfind("vis.conv.", 0) == 0 && name.ends_with(".bias")) continue;
      inputs.push_back(t);
    }
    const Tensor raw = random_tensor({2, config.raw_length}, rng, 0.0, 1.0);
    const Tensor charts = random_tensor({2, config.charts(), config.height, config.width}, rng, 0.0, 1.0);
    const Tensor target = random_tensor({2, config.grid}, rng, 1.0, 4.0);
    add_case(training ? "model_train" : "model_eval",
             [=](const auto&) { return mse_loss(predict(raw, charts, *params, config, training), target); },
             std::move(inputs));
  }
  return cases;
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options) {
  if (options.seeds.empty()) throw ValidationError("grad-check needs at least one seed");
  if (!(options.eps > 0.0)) throw ValidationError("grad-check eps must be positive");
  if (!options.inject_fault.empty() && options.inject_fault != "sigmoid")
    throw ValidationError("unknown fault '" + options.inject_fault + "' (supported: sigmoid)");

  std::vector<GradSuiteEntry> entries;
  for (auto seed : options.seeds) {
    auto cases = build_cases(seed, options);
    if (entries.empty()) {
      for (const auto& c : cases) entries.push_back({c.op, 0.0, seed, 0, 0, true});
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto r = grad_check(cases[i].f, std::move(cases[i].inputs), options.eps);
      auto& e = entries[i];
      if (r.max_relative_error > e.max_rel_err || std::isnan(r.max_relative_error)) {
        e.max_rel_err = r.max_relative_error;
        e.worst_seed = seed;
        e.worst_input = r.worst_input;
        e.worst_element = r.worst_element;
      }
    }
  }
  for (auto& e : entries) e.passed = e.max_rel_err < options.tolerance;
  return entries;
}

}  // namespace qdf
