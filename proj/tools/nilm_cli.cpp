// nilm: synth, preprocess, train, predict, evaluate, bench, inspect.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nilm/error.hpp"
#include "nilm/experiment.hpp"
#include "nilm/preprocess.hpp"
#include "nilm/series_io.hpp"

using namespace nilm;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool deterministic = false;
  std::optional<std::string> output_dir;
  std::string precision = "f32";
};

std::uint64_t seed_of(const Globals& g) { return g.seed.value_or(0); }
fs::path out_dir(const Globals& g, const char* fallback) { return g.output_dir ? fs::path(*g.output_dir) : fs::path(fallback); }

void apply_threads(const Globals& g) {
  if (g.deterministic) {
    omp_set_num_threads(1);
  } else if (g.threads > 0) {
    omp_set_num_threads(g.threads);
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// Manifest for the non-training subcommands: command line, seed, versions, timings.
void write_manifest(const fs::path& dir, const std::string& command, const Globals& g, json args, double seconds) {
  fs::create_directories(dir);
  write_json(dir / "manifest.json", {{"command", command},
                                     {"args", std::move(args)},
                                     {"seed", seed_of(g)},
                                     {"deterministic", g.deterministic},
                                     {"threads", omp_get_max_threads()},
                                     {"precision", g.precision},
                                     {"version", std::string(kVersion)},
                                     {"compiler", __VERSION__},
                                     {"hardware", hardware_note()},
                                     {"seconds", seconds}});
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
auto with_precision(const std::string& precision, F&& f) {
  return precision_from_string(precision) == Precision::f32 ? f(float{}) : f(double{});
}

std::string layer_table(const NetworkSpec& spec) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-8s %-8s %-6s %-9s %-7s %-10s\n", "layer", "in", "out", "width",
                "dilation", "act", "params");
  os << line;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::size_t params = l.in_channels * l.out_channels * l.width + (l.has_bias ? l.out_channels : 0);
    std::snprintf(line, sizeof line, "%-5zu %-8zu %-8zu %-6zu %-9zu %-7s %-10zu\n", i + 1, l.in_channels,
                  l.out_channels, l.width, l.dilation, l.activation == Activation::relu ? "relu" : "linear", params);
    os << line;
  }
  return os.str();
}

void print_inspect(const NetworkSpec& spec, std::int64_t interval) {
  const std::size_t rf = receptive_field(spec);
  std::cout << "model: " << to_string(spec.kind) << "\n" << layer_table(spec);
  std::cout << "receptive field: " << rf << " samples (" << static_cast<double>(rf * interval) / 60.0
            << " min at " << interval << " s)\n";
  if (spec.kind == ModelKind::s2p) {
    const auto [left, right] = s2p_padding(spec);
    std::cout << "window: " << spec.s2p_window << " samples, zero padding " << left << " + " << right << "\n";
  }
  std::cout << "parameters: " << param_count(spec) << "\n";
  std::cout << "MACs per output: " << mac_count_per_output(spec) << "\n";
}

ModelKind kind_arg(const std::string& s) {
  try {
    return model_kind_from_string(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// ---- synth ----

struct SynthArgs {
  std::vector<std::string> appliances = {"kettle"};
  std::size_t days = 14;
  std::size_t homes = 1;
  double noise_std = 10.0;
  bool list = false;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  if (a.list) {
    for (const auto& arch : builtin_archetypes()) std::cout << arch.name << "\n";
    return 0;
  }
  const auto t0 = std::chrono::steady_clock::now();
  HouseholdSpec spec;
  try {
    for (const auto& name : a.appliances) spec.appliances.push_back(builtin_archetype(name));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  spec.days = a.days;
  spec.noise_std = a.noise_std;
  const fs::path dir = out_dir(g, "synth");
  json homes = json::array();
  for (std::size_t k = 0; k < a.homes; ++k) {
    spec.seed = seed_of(g) + k;
    const fs::path home = dir / ("home_" + std::to_string(k));
    write_household(home, generate_household(spec), spec);
    homes.push_back(home.string());
    std::cout << "wrote " << home.string() << "\n";
  }
  write_manifest(dir, "synth",
                 g,
                 {{"appliances", a.appliances}, {"days", a.days}, {"homes", homes}, {"noise_std", a.noise_std}},
                 since(t0));
  return 0;
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string s30, s100;
  std::vector<std::string> iams;  // name=path
};

int run_preprocess(const Globals& g, const PreprocessArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = out_dir(g, "clean");
  fs::create_directories(dir);
  AggregateSources src{read_raw_csv(a.s30, SensorKind::aggregate_30A), std::nullopt};
  if (!a.s100.empty()) src.s100 = read_raw_csv(a.s100, SensorKind::aggregate_100A);
  const PowerSeries agg = preprocess_aggregate(src);
  write_power_csv(dir / "aggregate.csv", agg);
  std::cout << "aggregate: " << agg.size() << " samples, " << agg.valid_count() << " valid\n";
  json outputs = {{"aggregate", "aggregate.csv"}};
  for (const auto& item : a.iams) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--iam expects NAME=PATH, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    const PowerSeries s = preprocess_appliance(read_raw_csv(item.substr(eq + 1), SensorKind::iam_1s), name);
    write_power_csv(dir / (name + ".csv"), s);
    outputs[name] = name + ".csv";
    std::cout << name << ": " << s.size() << " samples, " << s.valid_count() << " valid\n";
  }
  write_manifest(dir, "preprocess", g, {{"aggregate_30a", a.s30}, {"aggregate_100a", a.s100}, {"iam", a.iams},
                                        {"outputs", outputs}},
                 since(t0));
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::optional<std::string> appliance, model;
  std::optional<std::size_t> filters, dilated_layers, max_epochs, batch_size, days;
  std::optional<double> step_size;
  std::vector<std::string> train_homes, val_homes, test_homes;
  bool synth = false;
};

ExperimentConfig train_config(const Globals& g, const TrainArgs& a) {
  try {
    ExperimentConfig c;
    if (!g.config.empty()) {
      json j = read_json_file(g.config);
      // A run manifest is accepted as a config: it embeds the full config echo.
      if (j.contains("config") && j.contains("version")) j = j.at("config");
      c = experiment_config_from_json(j);
    }
    if (a.model) {
      c.model.kind = kind_arg(*a.model);
      if (g.config.empty()) c.train = TrainConfig::defaults(c.model.kind);
    }
    if (a.appliance) c.appliance = *a.appliance;
    if (a.filters) c.model.fcn.filters = *a.filters;
    if (a.dilated_layers) c.model.fcn.dilated_layers = *a.dilated_layers;
    if (a.max_epochs) c.train.max_epochs = *a.max_epochs;
    if (a.batch_size) c.train.batch_size = *a.batch_size;
    if (a.step_size) c.train.step_size = *a.step_size;
    if (!a.train_homes.empty()) c.train_homes.assign(a.train_homes.begin(), a.train_homes.end());
    if (!a.val_homes.empty()) c.val_homes.assign(a.val_homes.begin(), a.val_homes.end());
    if (!a.test_homes.empty()) c.test_homes.assign(a.test_homes.begin(), a.test_homes.end());
    if (a.synth && !c.synth) c.synth = SynthSource{};
    if (a.days) {
      if (!c.synth) throw UsageError("--days applies to synthetic data only");
      c.synth->days = *a.days;
    }
    if (c.synth && a.appliance) c.synth->appliances = {*a.appliance};
    if (g.seed) c.seed = *g.seed;
    if (g.output_dir) c.output_dir = *g.output_dir;
    if (g.deterministic) c.deterministic = true;
    if (g.threads > 0) c.threads = g.threads;
    if (!g.precision.empty()) c.precision = precision_from_string(g.precision);
    c.validate();
    return c;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int run_train(const Globals& g, const TrainArgs& a) {
  const ExperimentConfig c = train_config(g, a);
  if (!c.synth) {
    for (const auto* list : {&c.train_homes, &c.val_homes, &c.test_homes}) {
      for (const auto& p : *list) {
        if (!fs::is_directory(p)) throw Error(Errc::io, "home directory not found: " + p.string());
      }
    }
  }
  const ExperimentResult r = run_experiment(c, [&](const EpochRecord& e) {
    std::cout << log_line(e, !c.deterministic) << std::endl;
  });
  std::cout << "best epoch " << r.report.best_epoch << " (val loss " << r.report.best_val_loss << "), stopped: "
            << to_string(r.report.stop_reason) << "\n";
  std::cout << "checkpoint: " << r.checkpoint.string() << "\n";
  if (r.test) {
    std::cout << format_table(*r.test);
    std::cout << "always-zero predictor MAE: " << r.zero_mae << " W\n";
  }
  return 0;
}

// ---- predict ----

struct PredictArgs {
  std::string checkpoint, aggregate, out;
};

int run_predict(const Globals& g, const PredictArgs& a) {
  apply_threads(g);
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = out_dir(g, "predict");
  fs::create_directories(dir);
  const fs::path out = a.out.empty() ? dir / "prediction.csv" : fs::path(a.out);
  const PowerSeries agg = read_power_csv(a.aggregate);
  const PowerSeries pred = with_precision(g.precision, [&](auto tag) {
    return predict(load_checkpoint<decltype(tag)>(a.checkpoint), agg);
  });
  write_power_csv(out, pred);
  std::cout << "wrote " << pred.size() << " predictions to " << out.string() << "\n";
  write_manifest(dir, "predict", g, {{"checkpoint", a.checkpoint}, {"aggregate", a.aggregate}, {"output", out.string()}},
                 since(t0));
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::vector<std::string> preds, truths, homes;
  std::string checkpoint;
  std::string appliance = "appliance";
};

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  apply_threads(g);
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  json extra = json::object();
  if (!a.checkpoint.empty()) {
    if (a.homes.empty() || !a.preds.empty()) throw UsageError("--checkpoint needs --home and no --pred/--truth");
    double zero = 0.0;
    report = with_precision(g.precision, [&](auto tag) {
      const auto model = load_checkpoint<decltype(tag)>(a.checkpoint);
      std::vector<HomeData> homes;
      for (const auto& h : a.homes) homes.push_back(load_home(h, model.meta.appliance));
      return evaluate_homes(model, homes, &zero);
    });
    extra["zero_predictor_mae_w"] = zero;
  } else {
    if (a.preds.empty() || a.preds.size() != a.truths.size()) {
      throw UsageError("give matching --pred/--truth pairs, or --checkpoint with --home");
    }
    std::vector<EvalCase> cases;
    for (std::size_t i = 0; i < a.preds.size(); ++i) {
      PowerSeries p = read_power_csv(a.preds[i]);
      PowerSeries t = read_power_csv(a.truths[i]);
      align(p, t);
      cases.push_back({a.appliance, "home_" + std::to_string(i), std::move(p), std::move(t)});
    }
    report = evaluate(cases);
  }
  std::cout << format_table(report);
  json j = to_json(report);
  j.update(extra);
  std::cout << j.dump() << "\n";
  const fs::path dir = out_dir(g, "evaluate");
  fs::create_directories(dir);
  write_json(dir / "eval.json", j);
  write_manifest(dir, "evaluate", g,
                 {{"pred", a.preds}, {"truth", a.truths}, {"checkpoint", a.checkpoint}, {"home", a.homes}}, since(t0));
  return 0;
}

// ---- bench ----

struct BenchArgs {
  std::size_t samples = kOneWeekSamples;
  std::size_t s2p_samples = 2000;
  std::size_t runs = 5;
};

int run_bench(const Globals& g, const BenchArgs& a) {
  apply_threads(g);
  const auto t0 = std::chrono::steady_clock::now();
  const NormStats stats{500.0, 400.0, 2000.0, 200.0, 10.0};
  BenchOptions fo;
  fo.sample_count = a.samples;
  fo.runs = a.runs;
  fo.seed = seed_of(g);
  BenchOptions so = fo;
  // S2P evaluates one full network per sample; time a subset and scale.
  so.timed_samples = std::min(a.s2p_samples, a.samples);
  const std::vector<BenchReport> reports = with_precision(g.precision, [&](auto tag) {
    using T = decltype(tag);
    const NetworkSpec fcn = build_fcn();
    const NetworkSpec s2p = build_s2p();
    const Checkpoint<T> fm{{fcn, stats, "kettle", 8}, init_params<T>(fcn, seed_of(g))};
    const Checkpoint<T> sm{{s2p, stats, "kettle", 8}, init_params<T>(s2p, seed_of(g))};
    return std::vector<BenchReport>{bench(fm, fo), bench(sm, so)};
  });
  std::cout << format_table(reports);
  std::cout << "MAC ratio S2P/FCN: "
            << static_cast<double>(reports[1].mac_per_output) / static_cast<double>(reports[0].mac_per_output) << "\n";
  std::cout << "prediction speedup FCN vs S2P: " << reports[1].prediction_seconds / reports[0].prediction_seconds
            << "x\n";
  const fs::path dir = out_dir(g, "bench");
  fs::create_directories(dir);
  json j = {{"fcn", to_json(reports[0])}, {"s2p", to_json(reports[1])}};
  write_json(dir / "bench.json", j);
  write_manifest(dir, "bench", g, {{"samples", a.samples}, {"s2p_samples", a.s2p_samples}, {"runs", a.runs}},
                 since(t0));
  return 0;
}

// ---- inspect ----

struct InspectArgs {
  std::string checkpoint;
  std::string model = "fcn";
};

int run_inspect(const Globals&, const InspectArgs& a) {
  if (!a.checkpoint.empty()) {
    const Checkpoint<float> m = load_checkpoint<float>(a.checkpoint);
    std::cout << "appliance: " << m.meta.appliance << "\n";
    print_inspect(m.meta.spec, m.meta.sample_interval);
    return 0;
  }
  print_inspect(kind_arg(a.model) == ModelKind::fcn ? build_fcn() : build_s2p(), kResampleInterval);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy disaggregation with a dilated fully convolutional network"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON, or a run manifest)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed (default 0)");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", g.deterministic, "Single thread, log without timings");
  app.add_option("--output-dir", g.output_dir, "Output directory");
  app.add_option("--precision", g.precision, "Arithmetic precision")->check(CLI::IsMember({"f32", "f64"}));

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write synthetic households (aggregate and per-appliance CSVs)");
  synth->add_option("--appliances", sa.appliances, "Built-in appliance archetypes");
  synth->add_option("--days", sa.days, "Days per household")->check(CLI::PositiveNumber);
  synth->add_option("--homes", sa.homes, "Number of households (seeds seed..seed+homes-1)")->check(CLI::PositiveNumber);
  synth->add_option("--noise-std", sa.noise_std, "Aggregate noise in W")->check(CLI::NonNegativeNumber);
  synth->add_flag("--list", sa.list, "List the built-in archetypes");

  PreprocessArgs pa;
  auto* prep = app.add_subcommand("preprocess", "Clean raw meter CSVs into 8 s series");
  prep->add_option("--aggregate-30a", pa.s30, "30 A clamp readings")->required()->check(CLI::ExistingFile);
  prep->add_option("--aggregate-100a", pa.s100, "100 A clamp readings")->check(CLI::ExistingFile);
  prep->add_option("--iam", pa.iams, "Appliance monitor as NAME=PATH (repeatable)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model; flags override the config");
  train_cmd->add_option("--appliance", ta.appliance);
  train_cmd->add_option("--model", ta.model, "fcn or s2p")->check(CLI::IsMember({"fcn", "s2p"}));
  train_cmd->add_option("--filters", ta.filters)->check(CLI::PositiveNumber);
  train_cmd->add_option("--dilated-layers", ta.dilated_layers)->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-epochs", ta.max_epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", ta.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--step-size", ta.step_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--train-home", ta.train_homes, "Home directory (repeatable)");
  train_cmd->add_option("--val-home", ta.val_homes, "Home directory (repeatable)");
  train_cmd->add_option("--test-home", ta.test_homes, "Home directory (repeatable)");
  train_cmd->add_flag("--synth", ta.synth, "Use seeded synthetic homes");
  train_cmd->add_option("--days", ta.days, "Days per synthetic home")->check(CLI::PositiveNumber);

  PredictArgs pr;
  auto* pred = app.add_subcommand("predict", "Disaggregate an aggregate CSV with a checkpoint");
  pred->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
  pred->add_option("--aggregate", pr.aggregate, "Clean 8 s aggregate CSV")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", pr.out, "Prediction CSV (default <output-dir>/prediction.csv)");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "MAE and SAE of predictions against ground truth");
  eval_cmd->add_option("--pred", ea.preds, "Prediction CSV (repeatable, paired with --truth)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", ea.truths, "Ground-truth CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--appliance", ea.appliance, "Label for --pred/--truth pairs");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->check(CLI::ExistingFile);
  eval_cmd->add_option("--home", ea.homes, "Home directory (repeatable)")->check(CLI::ExistingDirectory);

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Time one-week prediction for the default FCN and S2P");
  bench_cmd->add_option("--samples", ba.samples, "Samples to predict")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--s2p-samples", ba.s2p_samples, "S2P samples actually timed")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--runs", ba.runs)->check(CLI::PositiveNumber);

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Layer table, receptive field and parameter count");
  inspect->add_option("--checkpoint", ia.checkpoint)->check(CLI::ExistingFile);
  inspect->add_option("--model", ia.model, "Default architecture when no checkpoint is given")
      ->check(CLI::IsMember({"fcn", "s2p"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return run_synth(g, sa);
    if (*prep) return run_preprocess(g, pa);
    if (*train_cmd) return run_train(g, ta);
    if (*pred) return run_predict(g, pr);
    if (*eval_cmd) return run_evaluate(g, ea);
    if (*bench_cmd) return run_bench(g, ba);
    if (*inspect) return run_inspect(g, ia);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::diverged ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
