#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "nilm/checkpoint.hpp"
#include "nilm/synth.hpp"
#include "nilm/training.hpp"

using namespace nilm;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nilm_test_" + name);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

struct TinyData {
  NormStats stats;
  std::vector<WindowBatch> train, val;
};

TinyData kettle_data(const NetworkSpec& spec, std::size_t days) {
  std::vector<PowerSeries> aggs, apps;
  TinyData d;
  for (std::uint64_t home = 0; home < 2; ++home) {
    HouseholdSpec hs;
    hs.appliances = {builtin_archetype("kettle")};
    hs.appliances[0].events_per_day = 12;
    hs.days = days;
    hs.seed = 100 + home;
    const Household h = generate_household(hs);
    aggs.push_back(h.aggregate);
    apps.push_back(h.truth("kettle"));
  }
  d.stats = fit_norm_stats(std::span(aggs).first(1), std::span(apps).first(1));
  const WindowGeometry g = spec.kind == ModelKind::fcn ? fcn_geometry(receptive_field(spec))
                                                       : s2p_geometry(spec.s2p_window);
  auto make = [&](std::size_t i) {
    return spec.kind == ModelKind::fcn ? make_fcn_windows(aggs[i], apps[i], g) : make_s2p_windows(aggs[i], apps[i], g);
  };
  d.train.push_back(make(0));
  d.val.push_back(make(1));
  return d;
}

}  // namespace

TEST_CASE("TrainConfig defaults") {
  const TrainConfig f = TrainConfig::defaults(ModelKind::fcn);
  CHECK(f.step_size == 1e-3);
  CHECK(f.batch_size == 256);
  CHECK(f.plateau_patience_lr == 10);
  CHECK(f.lr_factor == 0.1);
  CHECK(f.stop_patience == 15);
  CHECK(f.max_epochs == 200);
  const TrainConfig s = TrainConfig::defaults(ModelKind::s2p);
  CHECK(s.batch_size == 4096);
  CHECK(s.plateau_patience_lr == 0);
  CHECK(s.stop_patience == 10);
  CHECK(s.max_epochs == 100);
}

TEST_CASE("PlateauSchedule: constant validation loss, FCN config") {
  PlateauSchedule sched(TrainConfig::defaults(ModelKind::fcn));
  std::size_t reduced_at = 0, stopped_at = 0;
  for (std::size_t epoch = 1; epoch <= 200 && stopped_at == 0; ++epoch) {
    const auto d = sched.observe(0.5);
    CHECK(d.improved == (epoch == 1));
    if (d.reduce_lr) {
      CHECK(reduced_at == 0);
      reduced_at = epoch;
    }
    if (d.stop) {
      stopped_at = epoch;
      CHECK(d.reason == StopReason::plateau);
    }
  }
  CHECK(reduced_at == 11);
  CHECK(stopped_at == 16);
  CHECK(sched.step_size() == doctest::Approx(1e-4));
}

TEST_CASE("PlateauSchedule: constant validation loss, S2P config") {
  PlateauSchedule sched(TrainConfig::defaults(ModelKind::s2p));
  std::size_t stopped_at = 0;
  for (std::size_t epoch = 1; epoch <= 100 && stopped_at == 0; ++epoch) {
    const auto d = sched.observe(0.5);
    CHECK_FALSE(d.reduce_lr);
    if (d.stop) stopped_at = epoch;
  }
  CHECK(stopped_at == 11);
  CHECK(sched.step_size() == 1e-3);
}

TEST_CASE("PlateauSchedule: strictly improving runs to max_epochs") {
  TrainConfig c = TrainConfig::defaults(ModelKind::fcn);
  c.max_epochs = 40;
  PlateauSchedule sched(c);
  double loss = 1.0;
  for (std::size_t epoch = 1; epoch <= 40; ++epoch) {
    loss *= 0.99;
    const auto d = sched.observe(loss);
    CHECK(d.improved);
    CHECK_FALSE(d.reduce_lr);
    CHECK(d.stop == (epoch == 40));
    if (d.stop) CHECK(d.reason == StopReason::max_epochs);
  }
  CHECK(sched.step_size() == 1e-3);
}

TEST_CASE("PlateauSchedule: ties are not improvements, counters restart on improvement") {
  PlateauSchedule sched(TrainConfig::defaults(ModelKind::fcn));
  CHECK(sched.observe(1.0).improved);
  CHECK_FALSE(sched.observe(1.0).improved);
  for (int i = 0; i < 8; ++i) sched.observe(2.0);
  // 9 epochs without improvement; an improvement now resets both counters.
  CHECK(sched.observe(0.9).improved);
  std::size_t reduce_epoch = 0;
  for (std::size_t e = 12; e <= 30; ++e) {
    const auto d = sched.observe(0.95);
    if (d.reduce_lr && reduce_epoch == 0) reduce_epoch = e;
    if (d.stop) {
      CHECK(e == 26);
      break;
    }
  }
  CHECK(reduce_epoch == 21);
}

TEST_CASE("checkpoint: default FCN roundtrip is bit-exact") {
  const NetworkSpec spec = build_fcn();
  const ParamSet<float> params = init_params<float>(spec, 17);
  REQUIRE(params.size() == 461441);
  const CheckpointMeta meta{spec, {612.5, 401.25, 2750.0, 120.0, 10.0}, "kettle", 8};
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(path, meta, params);
  const Checkpoint<float> back = load_checkpoint<float>(path);
  CHECK(back.meta.spec == spec);
  CHECK(back.meta.stats == meta.stats);
  CHECK(back.meta.appliance == "kettle");
  CHECK(back.meta.sample_interval == 8);
  REQUIRE(back.params.size() == params.size());
  CHECK(std::memcmp(back.params.values().data(), params.values().data(), params.size() * sizeof(float)) == 0);

  std::ifstream in(path, std::ios::binary);
  std::string magic(6, '\0');
  in.read(magic.data(), 6);
  CHECK(magic == "NILM1\n");
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: S2P spec roundtrip") {
  S2pConfig cfg;
  cfg.window = 31;
  cfg.stages = {{4, 5}, {3, 3}};
  cfg.hidden_units = 8;
  cfg.hidden_bias = false;
  const NetworkSpec spec = build_s2p(cfg);
  const auto params = init_params<double>(spec, 1);
  const auto path = temp_file("s2p.ckpt");
  save_checkpoint(path, CheckpointMeta{spec, {}, "microwave", 8}, params);
  const auto back = load_checkpoint<double>(path);
  CHECK(back.meta.spec == spec);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(back.params.values()[i] == static_cast<double>(static_cast<float>(params.values()[i])));
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: format errors") {
  const NetworkSpec spec = build_fcn({4, 3, 2, 2});
  const auto params = init_params<float>(spec, 1);
  const auto path = temp_file("bad.ckpt");
  save_checkpoint(path, CheckpointMeta{spec, {}, "kettle", 8}, params);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  std::string wrong = bytes;
  wrong[3] = 'X';
  write(wrong);
  CHECK(code_of([&] { load_checkpoint<float>(path); }) == Errc::bad_format);

  write(bytes.substr(0, bytes.size() - 4));
  CHECK(code_of([&] { load_checkpoint<float>(path); }) == Errc::corrupt);

  write(bytes + "xxxx");
  CHECK(code_of([&] { load_checkpoint<float>(path); }) == Errc::corrupt);

  write(bytes);
  CHECK_NOTHROW(load_checkpoint<float>(path));
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_checkpoint<float>(path); }) == Errc::io);
}

TEST_CASE("train: small FCN learns and is deterministic") {
  const NetworkSpec spec = build_fcn({8, 5, 4, 2});
  const TinyData d = kettle_data(spec, 3);
  TrainConfig c = TrainConfig::defaults(ModelKind::fcn);
  c.batch_size = 4;
  c.max_epochs = 4;
  c.seed = 9;
  c.step_size = 3e-3;

  std::vector<std::size_t> seen;
  const TrainResult<float> a = train<float>(spec, d.stats, d.train, d.val, c, {[&](const EpochRecord& r) { seen.push_back(r.epoch); }});
  const TrainResult<float> b = train<float>(spec, d.stats, d.train, d.val, c);
  CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(a.report.epochs_run() == 4);
  CHECK(a.report.stop_reason == StopReason::max_epochs);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(a.report.epochs[e].train_loss == b.report.epochs[e].train_loss);
    CHECK(a.report.epochs[e].val_loss == b.report.epochs[e].val_loss);
  }
  CHECK(a.params == b.params);

  // Best epoch bookkeeping.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : a.report.epochs) best = std::min(best, r.val_loss);
  CHECK(a.report.best_val_loss == best);
  CHECK(evaluate_loss(spec, a.params, d.stats, d.val) == doctest::Approx(best).epsilon(1e-9));

  const ParamSet<float> init = init_params<float>(spec, c.seed);
  CHECK(best < evaluate_loss(spec, init, d.stats, d.val));
}

TEST_CASE("train: tiny S2P runs in double precision") {
  S2pConfig cfg;
  cfg.window = 31;
  cfg.stages = {{4, 5}, {4, 3}};
  cfg.hidden_units = 8;
  const NetworkSpec spec = build_s2p(cfg);
  const TinyData d = kettle_data(spec, 1);
  TrainConfig c = TrainConfig::defaults(ModelKind::s2p);
  c.batch_size = 512;
  c.max_epochs = 2;
  const TrainResult<double> r = train<double>(spec, d.stats, d.train, d.val, c);
  CHECK(r.report.epochs_run() == 2);
  for (const auto& e : r.report.epochs) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_loss));
    CHECK(e.step_size == 1e-3);
  }
}

TEST_CASE("train: divergence is reported with the partial report") {
  const NetworkSpec spec = build_fcn({4, 3, 2, 2});
  const TinyData d = kettle_data(spec, 1);
  TrainConfig c = TrainConfig::defaults(ModelKind::fcn);
  c.step_size = 1e30;
  c.batch_size = 1;
  c.max_epochs = 50;
  try {
    train<float>(spec, d.stats, d.train, d.val, c);
    FAIL("expected divergence");
  } catch (const TrainDiverged& e) {
    CHECK(e.code() == Errc::diverged);
    CHECK(e.partial().epochs_run() < 50);
  }
}

TEST_CASE("train: argument checks") {
  const NetworkSpec spec = build_fcn({4, 3, 2, 2});
  const TinyData d = kettle_data(spec, 1);
  TrainConfig c = TrainConfig::defaults(ModelKind::s2p);
  CHECK(code_of([&] { train<float>(spec, d.stats, d.train, d.val, c); }) == Errc::invalid_argument);
  c = TrainConfig::defaults(ModelKind::fcn);
  CHECK(code_of([&] { train<float>(spec, d.stats, {}, d.val, c); }) == Errc::no_valid_targets);
  c.batch_size = 0;
  CHECK(code_of([&] { train<float>(spec, d.stats, d.train, d.val, c); }) == Errc::invalid_argument);
}
