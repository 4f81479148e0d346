#pragma once

// Reproducible experiments: a JSON configuration, data loading (home
// directories or seeded synthetic homes), training, test evaluation and the
// run artifacts (checkpoint, training log, manifest, evaluation report).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilm/eval_bench.hpp"
#include "nilm/synth.hpp"
#include "nilm/training.hpp"

namespace nilm {

inline constexpr std::string_view kVersion = "1.0.0";

enum class Precision { f32, f64 };
std::string_view to_string(Precision p);
Precision precision_from_string(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::fcn;
  FcnConfig fcn;
  std::size_t output_len = 0;  // FCN output window; 0 means the receptive field
  S2pConfig s2p;
};

NetworkSpec build_network(const ModelConfig& config);

// Synthetic homes generated from the experiment seed. Home k uses seed
// `seed + k` with homes numbered train, then validation, then test.
struct SynthSource {
  std::vector<std::string> appliances = {"kettle"};
  std::size_t days = 14;
  std::size_t train_homes = 3;
  std::size_t val_homes = 1;
  std::size_t test_homes = 1;
  double noise_std = 10.0;
};

struct ExperimentConfig {
  std::string appliance = "kettle";
  // Home directories holding aggregate.csv and <appliance>.csv.
  std::vector<std::filesystem::path> train_homes, val_homes, test_homes;
  std::optional<SynthSource> synth;
  ModelConfig model;
  TrainConfig train = TrainConfig::defaults(ModelKind::fcn);
  std::filesystem::path output_dir = "run";
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  bool deterministic = false;
  int threads = 0;  // 0 keeps the OpenMP default

  // Throws invalid-argument on inconsistent settings.
  void validate() const;
};

// Missing keys keep their defaults; the train section starts from the
// defaults of the model kind. Unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct HomeData {
  std::string name;
  PowerSeries aggregate;
  PowerSeries appliance;
};

// Reads and aligns <dir>/aggregate.csv and <dir>/<appliance>.csv.
HomeData load_home(const std::filesystem::path& dir, const std::string& appliance);

struct ExperimentData {
  std::vector<HomeData> train, val, test;
};

ExperimentData prepare_data(const ExperimentConfig& config);

// One JSON object per epoch. Wall-clock seconds are left out when
// `with_seconds` is false so deterministic logs compare byte for byte.
std::string log_line(const EpochRecord& record, bool with_seconds);

struct ExperimentResult {
  TrainReport report;
  NormStats stats;
  std::optional<EvalReport> test;
  double zero_mae = 0.0;  // mean over test homes of the always-zero predictor's MAE
  std::filesystem::path checkpoint, log, manifest, evaluation;
};

// Trains, writes model.ckpt, training_log.jsonl, manifest.json and (with test
// homes) eval.json into output_dir. TrainDiverged propagates after the partial
// log and manifest are written.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::function<void(const EpochRecord&)>& progress = {});

// Evaluates a checkpoint on homes; zero_mae receives the zero-predictor MAE.
template <typename T>
EvalReport evaluate_homes(const Checkpoint<T>& model, const std::vector<HomeData>& homes, double* zero_mae = nullptr);

}  // namespace nilm
