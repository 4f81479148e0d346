#include "nilm/experiment.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <set>

#include "nilm/error.hpp"
#include "nilm/series_io.hpp"

namespace nilm {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, where + " must be a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw Error(Errc::invalid_argument, "unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

std::vector<std::filesystem::path> paths(const json& j) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : j) out.emplace_back(p.get<std::string>());
  return out;
}

json path_list(const std::vector<std::filesystem::path>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(p.string());
  return a;
}

ModelConfig model_from_json(const json& j) {
  reject_unknown(j, {"kind", "filters", "initial_width", "dilated_layers", "dilation_base", "output_len", "window",
                     "stages", "hidden_units", "hidden_bias"},
                 "model");
  ModelConfig m;
  if (j.contains("kind")) m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  read(j, "filters", m.fcn.filters);
  read(j, "initial_width", m.fcn.initial_width);
  read(j, "dilated_layers", m.fcn.dilated_layers);
  read(j, "dilation_base", m.fcn.dilation_base);
  read(j, "output_len", m.output_len);
  read(j, "window", m.s2p.window);
  read(j, "hidden_units", m.s2p.hidden_units);
  read(j, "hidden_bias", m.s2p.hidden_bias);
  if (j.contains("stages")) {
    m.s2p.stages.clear();
    for (const auto& s : j.at("stages")) m.s2p.stages.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  }
  return m;
}

json to_json(const ModelConfig& m) {
  if (m.kind == ModelKind::fcn) {
    return {{"kind", "fcn"},
            {"filters", m.fcn.filters},
            {"initial_width", m.fcn.initial_width},
            {"dilated_layers", m.fcn.dilated_layers},
            {"dilation_base", m.fcn.dilation_base},
            {"output_len", m.output_len}};
  }
  json stages = json::array();
  for (const auto& s : m.s2p.stages) stages.push_back({s.filters, s.width});
  return {{"kind", "s2p"},
          {"window", m.s2p.window},
          {"stages", stages},
          {"hidden_units", m.s2p.hidden_units},
          {"hidden_bias", m.s2p.hidden_bias}};
}

TrainConfig train_from_json(const json& j, ModelKind kind) {
  reject_unknown(j, {"step_size", "batch_size", "plateau_patience_lr", "lr_factor", "stop_patience", "max_epochs"},
                 "train");
  TrainConfig t = TrainConfig::defaults(kind);
  read(j, "step_size", t.step_size);
  read(j, "batch_size", t.batch_size);
  read(j, "plateau_patience_lr", t.plateau_patience_lr);
  read(j, "lr_factor", t.lr_factor);
  read(j, "stop_patience", t.stop_patience);
  read(j, "max_epochs", t.max_epochs);
  return t;
}

json to_json(const TrainConfig& t) {
  return {{"step_size", t.step_size},         {"batch_size", t.batch_size},
          {"plateau_patience_lr", t.plateau_patience_lr}, {"lr_factor", t.lr_factor},
          {"stop_patience", t.stop_patience}, {"max_epochs", t.max_epochs}};
}

SynthSource synth_from_json(const json& j) {
  reject_unknown(j, {"appliances", "days", "train_homes", "val_homes", "test_homes", "noise_std"}, "synth");
  SynthSource s;
  read(j, "appliances", s.appliances);
  read(j, "days", s.days);
  read(j, "train_homes", s.train_homes);
  read(j, "val_homes", s.val_homes);
  read(j, "test_homes", s.test_homes);
  read(j, "noise_std", s.noise_std);
  return s;
}

json to_json(const SynthSource& s) {
  return {{"appliances", s.appliances}, {"days", s.days},           {"train_homes", s.train_homes},
          {"val_homes", s.val_homes},   {"test_homes", s.test_homes}, {"noise_std", s.noise_std}};
}

WindowBatch make_windows(const NetworkSpec& spec, const ModelConfig& model, const HomeData& home) {
  if (spec.kind == ModelKind::fcn) {
    return make_fcn_windows(home.aggregate, home.appliance, fcn_geometry(receptive_field(spec), model.output_len));
  }
  return make_s2p_windows(home.aggregate, home.appliance, s2p_geometry(spec.s2p_window));
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json report_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) epochs.push_back(json::parse(log_line(e, true)));
  return {{"epochs_run", r.epochs_run()},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss},
          {"stop_reason", std::string(to_string(r.stop_reason))},
          {"total_seconds", r.total_seconds},
          {"epochs", epochs}};
}

template <typename T>
ExperimentResult run_typed(const ExperimentConfig& config, const NetworkSpec& spec, const ExperimentData& data,
                           const std::function<void(const EpochRecord&)>& progress) {
  ExperimentResult result;
  std::vector<PowerSeries> aggs, apps;
  for (const auto& h : data.train) {
    aggs.push_back(h.aggregate);
    apps.push_back(h.appliance);
  }
  result.stats = fit_norm_stats(aggs, apps);

  std::vector<WindowBatch> train_batches, val_batches;
  for (const auto& h : data.train) train_batches.push_back(make_windows(spec, config.model, h));
  for (const auto& h : data.val) val_batches.push_back(make_windows(spec, config.model, h));

  std::filesystem::create_directories(config.output_dir);
  result.checkpoint = config.output_dir / "model.ckpt";
  result.log = config.output_dir / "training_log.jsonl";
  result.manifest = config.output_dir / "manifest.json";
  std::ofstream log(result.log, std::ios::trunc);
  if (!log) throw Error(Errc::io, "cannot write " + result.log.string());

  TrainConfig tc = config.train;
  tc.model_kind = spec.kind;
  tc.seed = config.seed;

  json manifest = {{"version", std::string(kVersion)},
                   {"compiler", __VERSION__},
                   {"config", to_json(config)},
                   {"seed", config.seed},
                   {"deterministic", config.deterministic},
                   {"threads", omp_get_max_threads()},
                   {"hardware", hardware_note()},
                   {"network", {{"receptive_field", receptive_field(spec)},
                                {"param_count", param_count(spec)},
                                {"mac_per_output", mac_count_per_output(spec)}}},
                   {"norm_stats", to_json(result.stats)},
                   {"data", {{"train_homes", data.train.size()},
                             {"val_homes", data.val.size()},
                             {"test_homes", data.test.size()}}}};

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    log << log_line(r, !config.deterministic) << "\n";
    log.flush();
    if (progress) progress(r);
  };
  std::optional<TrainResult<T>> trained;
  try {
    trained.emplace(train<T>(spec, result.stats, train_batches, val_batches, tc, hooks));
  } catch (const TrainDiverged& e) {
    manifest["training"] = report_json(e.partial());
    manifest["error"] = e.what();
    write_json(result.manifest, manifest);
    throw;
  }
  result.report = trained->report;

  const CheckpointMeta meta{spec, result.stats, config.appliance, 8};
  save_checkpoint(result.checkpoint, meta, trained->params);
  manifest["training"] = report_json(result.report);
  manifest["artifacts"] = {{"checkpoint", "model.ckpt"}, {"training_log", "training_log.jsonl"}};

  if (!data.test.empty()) {
    // Evaluate exactly what was saved.
    const Checkpoint<T> saved = load_checkpoint<T>(result.checkpoint);
    result.test = evaluate_homes(saved, data.test, &result.zero_mae);
    result.evaluation = config.output_dir / "eval.json";
    json ev = to_json(*result.test);
    ev["zero_predictor_mae_w"] = result.zero_mae;
    write_json(result.evaluation, ev);
    manifest["artifacts"]["evaluation"] = "eval.json";
    manifest["test"] = ev;
  }
  write_json(result.manifest, manifest);
  return result;
}

}  // namespace

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_string(std::string_view s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw Error(Errc::invalid_argument, "precision must be f32 or f64");
}

NetworkSpec build_network(const ModelConfig& config) {
  return config.kind == ModelKind::fcn ? build_fcn(config.fcn) : build_s2p(config.s2p);
}

void ExperimentConfig::validate() const {
  if (appliance.empty()) throw Error(Errc::invalid_argument, "appliance name is empty");
  if (synth) {
    if (synth->train_homes == 0 || synth->val_homes == 0) {
      throw Error(Errc::invalid_argument, "synthetic data needs training and validation homes");
    }
    bool listed = false;
    for (const auto& a : synth->appliances) listed = listed || a == appliance;
    if (!listed) throw Error(Errc::invalid_argument, "appliance '" + appliance + "' is not among the synthetic appliances");
  } else if (train_homes.empty() || val_homes.empty()) {
    throw Error(Errc::invalid_argument, "config needs data.train and data.val home directories (or a synth section)");
  }
  TrainConfig t = train;
  t.model_kind = model.kind;
  t.validate();
  build_network(model);
  if (threads < 0) throw Error(Errc::invalid_argument, "threads must be >= 0");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    reject_unknown(j, {"appliance", "data", "synth", "model", "train", "output_dir", "seed", "precision",
                       "deterministic", "threads"},
                   "experiment config");
    ExperimentConfig c;
    read(j, "appliance", c.appliance);
    if (j.contains("data")) {
      const json& d = j.at("data");
      reject_unknown(d, {"train", "val", "test"}, "data");
      if (d.contains("train")) c.train_homes = paths(d.at("train"));
      if (d.contains("val")) c.val_homes = paths(d.at("val"));
      if (d.contains("test")) c.test_homes = paths(d.at("test"));
    }
    if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    c.train = train_from_json(j.value("train", json::object()), c.model.kind);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    read(j, "seed", c.seed);
    if (j.contains("precision")) c.precision = precision_from_string(j.at("precision").get<std::string>());
    read(j, "deterministic", c.deterministic);
    read(j, "threads", c.threads);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("experiment config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j = {{"appliance", c.appliance},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"output_dir", c.output_dir.string()},
            {"seed", c.seed},
            {"precision", std::string(to_string(c.precision))},
            {"deterministic", c.deterministic},
            {"threads", c.threads}};
  if (c.synth) {
    j["synth"] = to_json(*c.synth);
  } else {
    j["data"] = {{"train", path_list(c.train_homes)}, {"val", path_list(c.val_homes)}, {"test", path_list(c.test_homes)}};
  }
  return j;
}

HomeData load_home(const std::filesystem::path& dir, const std::string& appliance) {
  HomeData h;
  h.name = dir.filename().string();
  if (h.name.empty()) h.name = dir.parent_path().filename().string();
  h.aggregate = read_power_csv(dir / "aggregate.csv");
  h.appliance = read_power_csv(dir / (appliance + ".csv"));
  align(h.aggregate, h.appliance);
  return h;
}

ExperimentData prepare_data(const ExperimentConfig& config) {
  ExperimentData d;
  if (!config.synth) {
    for (const auto& p : config.train_homes) d.train.push_back(load_home(p, config.appliance));
    for (const auto& p : config.val_homes) d.val.push_back(load_home(p, config.appliance));
    for (const auto& p : config.test_homes) d.test.push_back(load_home(p, config.appliance));
    return d;
  }
  const SynthSource& s = *config.synth;
  HouseholdSpec spec;
  for (const auto& name : s.appliances) spec.appliances.push_back(builtin_archetype(name));
  spec.days = s.days;
  spec.noise_std = s.noise_std;
  std::uint64_t k = 0;
  auto make = [&](std::vector<HomeData>& out, std::size_t count, const std::string& prefix) {
    for (std::size_t i = 0; i < count; ++i, ++k) {
      spec.seed = config.seed + k;
      const Household h = generate_household(spec);
      out.push_back({prefix + std::to_string(i), h.aggregate, h.truth(config.appliance)});
    }
  };
  make(d.train, s.train_homes, "train_");
  make(d.val, s.val_homes, "val_");
  make(d.test, s.test_homes, "test_");
  return d;
}

std::string log_line(const EpochRecord& r, bool with_seconds) {
  json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.step_size}};
  if (with_seconds) j["seconds"] = r.seconds;
  return j.dump();
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::function<void(const EpochRecord&)>& progress) {
  config.validate();
  if (config.deterministic) {
    omp_set_num_threads(1);
  } else if (config.threads > 0) {
    omp_set_num_threads(config.threads);
  }
  const NetworkSpec spec = build_network(config.model);
  const ExperimentData data = prepare_data(config);
  return config.precision == Precision::f32 ? run_typed<float>(config, spec, data, progress)
                                            : run_typed<double>(config, spec, data, progress);
}

template <typename T>
EvalReport evaluate_homes(const Checkpoint<T>& model, const std::vector<HomeData>& homes, double* zero_mae) {
  std::vector<EvalCase> cases;
  double zero = 0.0;
  for (const auto& h : homes) {
    PowerSeries pred = predict(model, h.aggregate);
    zero += mae(PowerSeries::from_values(h.appliance.start_time, h.appliance.interval,
                                         std::vector<double>(h.appliance.size(), 0.0)),
                h.appliance);
    cases.push_back({model.meta.appliance, h.name, std::move(pred), h.appliance});
  }
  if (zero_mae) *zero_mae = homes.empty() ? 0.0 : zero / static_cast<double>(homes.size());
  return evaluate(cases);
}

template EvalReport evaluate_homes(const Checkpoint<float>&, const std::vector<HomeData>&, double*);
template EvalReport evaluate_homes(const Checkpoint<double>&, const std::vector<HomeData>&, double*);

}  // namespace nilm
