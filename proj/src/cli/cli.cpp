#include "qdf/cli/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdf/charts/charts.hpp"
#include "qdf/cli/grad_suite.hpp"
#include "qdf/cli/study.hpp"
#include "qdf/data/io.hpp"
#include "qdf/data/synthetic.hpp"
#include "qdf/data/transforms.hpp"
#include "qdf/errors.hpp"
#include "qdf/train/train.hpp"

namespace qdf {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << text;
  if (!f) throw ValidationError("failed writing " + path.string());
}

// Model-shape flags shared by train and ablate. The grid always comes from the data.
struct ModelFlags {
  std::string selection_file;
  std::size_t resolution = 0;

  void add(CLI::App* cmd, ModelConfig& m) {
    cmd->add_option("--raw-length", m.raw_length, "Raw vector length n")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--mlp-layers", m.mlp_layers, "Raw MLP depth")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--mlp-hidden", m.mlp_hidden, "Raw MLP hidden width")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--d-model", m.d_model, "Token width")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--conv-channels", m.conv_channels, "Channels per conv stage")->delimiter(',')->capture_default_str();
    cmd->add_option("--heads", m.heads, "Fusion attention heads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--blocks", m.fusion_blocks, "Fusion transformer blocks")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--ffn-mult", m.ffn_mult, "Feed-forward expansion")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--resolution", resolution, "Chart height and width")->check(CLI::PositiveNumber);
    cmd->add_option("--max-points", m.max_points, "Interval-sampling cap M")->capture_default_str()->check(CLI::Range(2, 1 << 30));
    cmd->add_option("--selection-file", selection_file, "Indicator names to chart, one per line")->check(CLI::ExistingFile);
  }

  void apply(ModelConfig& m) const {
    if (resolution != 0) m.height = m.width = resolution;
    if (!selection_file.empty()) m.chart_selection = load_name_list(selection_file);
  }
};

std::size_t dataset_grid(const Dataset& ds, const std::string& what) {
  if (ds.empty()) throw ValidationError(what + " has no records");
  return ds.records.front().grid_size();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::size_t num = 1200;
  std::uint64_t seed = 0;
  GeneratorParams gen;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  GeneratorParams p = a.gen;
  p.count = a.num;
  p.validate();
  const Dataset ds = synthesize_dataset(p, a.seed);
  save_dataset(ds, a.out);
  out << "wrote " << ds.size() << " records to " << a.out << "\n";
  return 0;
}

struct RenderArgs {
  std::string in, out;
  std::size_t max_points = 100;
  std::size_t resolution = 224;
  std::vector<std::string> ids;
  std::string selection_file;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.in);
  if (ds.empty()) throw ValidationError(a.in + " has no records");
  const auto selection = a.selection_file.empty() ? default_chart_selection() : load_name_list(a.selection_file);
  std::vector<const RawRecord*> chosen;
  if (a.ids.empty()) {
    chosen.push_back(&ds.records.front());
  } else {
    for (const auto& id : a.ids) {
      const RawRecord* hit = nullptr;
      for (const auto& r : ds.records)
        if (r.id == id) hit = &r;
      if (!hit) throw ValidationError("unknown record id '" + id + "'");
      chosen.push_back(hit);
    }
  }
  std::size_t files = 0;
  for (const RawRecord* r : chosen) {
    const ChartStack stack = render_charts(*r, selection, SamplingPolicy{a.max_points}, a.resolution, a.resolution);
    files += export_charts(stack, r->id, selection, a.out).size();
  }
  out << "wrote " << files << " charts for " << chosen.size() << " record(s) to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, test_data, ckpt, metrics;
  double test_fraction = 1.0 / 6.0;
  std::uint64_t split_seed = 0;
  std::string variant = "multimodal";
  std::string dtype = "f64";
  bool wall_time = false;
  bool quiet = false;
  TrainConfig train;
  ModelConfig model;
  ModelFlags model_flags;
};

int cmd_train(TrainArgs& a, std::ostream& out) {
  TrainConfig tc = a.train;
  tc.variant = parse_variant(a.variant);
  tc.dtype = parse_dtype(a.dtype);
  a.model_flags.apply(a.model);

  Dataset all = load_dataset(a.data);
  Dataset train_set, test_set;
  bool have_test = true;
  if (!a.test_data.empty()) {
    train_set = std::move(all);
    test_set = load_dataset(a.test_data);
  } else if (a.test_fraction > 0.0) {
    std::tie(train_set, test_set) = split_dataset(all, a.test_fraction, a.split_seed);
  } else {
    train_set = std::move(all);
    have_test = false;
  }
  ModelConfig mc = a.model;
  mc.grid = dataset_grid(train_set, "training data");

  TrainOptions options;
  options.test = have_test ? &test_set : nullptr;
  options.record_wall_time = a.wall_time;
  if (!a.quiet) {
    options.on_row = [&out](const MetricsRow& r) {
      out << "epoch " << r.epoch << " " << r.split << " mse=" << fmt("%.10g", r.mse) << "\n";
    };
  }
  const TrainResult result = train(mc, tc, train_set, options);
  if (!a.ckpt.empty()) save_checkpoint(result.checkpoint, a.ckpt);
  if (!a.metrics.empty()) result.log.save(a.metrics);
  out << "final train mse=" << fmt("%.17g", result.log.last("train").mse) << "\n";
  if (have_test) out << "final test mse=" << fmt("%.17g", result.log.last("test").mse) << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, split = "test";
  double test_fraction = 1.0 / 6.0;
  std::uint64_t split_seed = 0;
  std::size_t batch = 64;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(a.ckpt);
  Dataset all = load_dataset(a.data);
  Dataset chosen;
  if (a.split == "all") {
    chosen = std::move(all);
  } else {
    auto [train_set, test_set] = split_dataset(all, a.test_fraction, a.split_seed);
    chosen = a.split == "test" ? std::move(test_set) : std::move(train_set);
  }
  out << "mse=" << fmt("%.17g", evaluate(ckpt, chosen, a.batch)) << "\n";
  return 0;
}

struct AblateArgs {
  std::string study, data, out, summary;
  std::vector<std::string> sweep;
  std::string dtype = "f64";
  bool no_wall_time = false;
  StudySpec spec;
  ModelFlags model_flags;
};

int cmd_ablate(AblateArgs& a, std::ostream& out) {
  StudySpec spec = a.spec;
  spec.kind = parse_study(a.study);
  spec.settings = a.sweep;
  spec.train.dtype = parse_dtype(a.dtype);
  spec.record_wall_time = !a.no_wall_time;
  a.model_flags.apply(spec.model);
  const Dataset ds = load_dataset(a.data);
  spec.model.grid = dataset_grid(ds, "study data");

  const StudyResult result = run_study(spec, ds, [&out](const StudyRow& r) {
    out << r.study << " " << r.setting << " seed " << r.seed << " test_mse=" << fmt("%.10g", r.test_mse) << " "
        << r.status << "\n";
  });
  write_text(a.out, result.to_csv());
  std::filesystem::path summary = a.summary;
  if (summary.empty()) {
    summary = std::filesystem::path(a.out);
    summary.replace_filename(summary.stem().string() + "_summary.csv");
  }
  write_text(summary, result.summary_csv());
  for (const auto& [setting, med] : result.medians())
    out << "median " << setting << " test_mse=" << fmt("%.10g", med) << "\n";
  out << "wrote " << result.rows.size() << " rows to " << a.out << "\n";
  return 0;
}

int cmd_grad_check(const GradSuiteOptions& o, std::ostream& out) {
  const auto entries = run_grad_suite(o);
  bool all = true;
  for (const auto& e : entries) {
    char line[256];
    std::snprintf(line, sizeof line, "%-18s max_rel_err=%.3e seed=%llu input=%zu element=%zu %s\n", e.op.c_str(),
                  e.max_rel_err, static_cast<unsigned long long>(e.worst_seed), e.worst_input, e.worst_element,
                  e.passed ? "PASS" : "FAIL");
    out << line;
    all = all && e.passed;
  }
  out << (all ? "all gradient checks passed" : "gradient check FAILED") << "\n";
  return all ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety-factor profile reconstruction from diagnostic time series"};
  app.name("qdf");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as JSONL");
  gen_cmd->add_option("--out", gen.out, "Output file")->required();
  gen_cmd->add_option("--num", gen.num, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--grid", gen.gen.grid, "Profile grid size G")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  gen_cmd->add_option("--noise", gen.gen.noise, "Gaussian noise std-dev")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--distractor-fraction", gen.gen.distractor_fraction, "Fraction of pure-noise indicators")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Render chart stacks to PGM files");
  render_cmd->add_option("--in", render.in, "Dataset file")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render.out, "Output directory")->required();
  render_cmd->add_option("--max-points", render.max_points, "Interval-sampling cap M")->capture_default_str()->check(CLI::Range(2, 1 << 30));
  render_cmd->add_option("--resolution", render.resolution, "Image height and width")->capture_default_str()->check(CLI::PositiveNumber);
  render_cmd->add_option("--ids", render.ids, "Record ids (default: the first record)")->delimiter(',');
  render_cmd->add_option("--selection-file", render.selection_file, "Indicator names, one per line")->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint and metrics");
  train_cmd->add_option("--data", tr.data, "Training dataset (split unless --test-data is given)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--test-data", tr.test_data, "Separate test dataset")->check(CLI::ExistingFile);
  train_cmd->add_option("--test-fraction", tr.test_fraction, "Held-out fraction of --data; 0 disables testing")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--split-seed", tr.split_seed, "Train/test split seed")->capture_default_str();
  train_cmd->add_option("--variant", tr.variant, "multimodal, mlp_only or mlp_attn")->capture_default_str();
  train_cmd->add_option("--epochs", tr.train.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.train.lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.train.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.train.seed, "Initialization and shuffle seed")->capture_default_str();
  train_cmd->add_option("--dtype", tr.dtype, "f64 or f32")->capture_default_str();
  train_cmd->add_option("--eval-every", tr.train.eval_every, "Epochs between test evaluations")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--ckpt", tr.ckpt, "Checkpoint output");
  train_cmd->add_option("--metrics", tr.metrics, "Metrics CSV output");
  train_cmd->add_flag("--wall-time", tr.wall_time, "Record elapsed seconds in the metrics CSV");
  train_cmd->add_flag("--quiet", tr.quiet, "Only print the final metrics");
  tr.model_flags.add(train_cmd, tr.model);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; prints mse=<value>");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", ev.split, "test, train or all")->capture_default_str()->check(CLI::IsMember({"test", "train", "all"}));
  eval_cmd->add_option("--test-fraction", ev.test_fraction, "Held-out fraction used at training time")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 0.999999));
  eval_cmd->add_option("--split-seed", ev.split_seed, "Split seed used at training time")->capture_default_str();
  eval_cmd->add_option("--batch", ev.batch, "Evaluation batch size")->capture_default_str()->check(CLI::PositiveNumber);

  AblateArgs ab;
  ab.spec.train.epochs = 30;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation study and write a results CSV");
  ablate_cmd->add_option("--study", ab.study, "components, sample_points, resolution or blocks")->required();
  ablate_cmd->add_option("--data", ab.data, "Dataset file")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--seeds", ab.spec.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  ablate_cmd->add_option("--out", ab.out, "Results CSV")->required();
  ablate_cmd->add_option("--summary", ab.summary, "Per-setting medians CSV (default: <out>_summary.csv)");
  ablate_cmd->add_option("--sweep", ab.sweep, "Override the sweep values")->delimiter(',');
  ablate_cmd->add_option("--test-fraction", ab.spec.test_fraction, "Held-out fraction")->capture_default_str()->check(CLI::Range(1e-9, 0.999999));
  ablate_cmd->add_option("--split-seed", ab.spec.split_seed, "Split seed")->capture_default_str();
  ablate_cmd->add_option("--epochs", ab.spec.train.epochs, "Epochs per run")->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--lr", ab.spec.train.lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--batch", ab.spec.train.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--dtype", ab.dtype, "f64 or f32")->capture_default_str();
  ablate_cmd->add_flag("--no-wall-time", ab.no_wall_time, "Write 0 instead of elapsed seconds");
  ab.model_flags.add(ablate_cmd, ab.spec.model);

  GradSuiteOptions gs;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of every op and the model");
  grad_cmd->add_option("--seeds", gs.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  grad_cmd->add_option("--eps", gs.eps, "Central-difference step")->capture_default_str()->check(CLI::PositiveNumber);
  grad_cmd->add_option("--inject-fault", gs.inject_fault, "Corrupt one kernel's derivative (sigmoid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*render_cmd) return cmd_render(render, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*ablate_cmd) return cmd_ablate(ab, out);
    if (*grad_cmd) return cmd_grad_check(gs, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace qdf
