#include "nilm/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "nilm/rng.hpp"

namespace nilm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct WindowRef {
  std::size_t batch;
  std::size_t window;
};

std::vector<WindowRef> valid_windows(std::span<const WindowBatch> data) {
  std::vector<WindowRef> refs;
  for (std::size_t b = 0; b < data.size(); ++b) {
    for (std::size_t w = 0; w < data[b].windows.size(); ++w) {
      if (data[b].windows[w].valid) refs.push_back({b, w});
    }
  }
  return refs;
}

void check_kind(const NetworkSpec& spec, std::span<const WindowBatch> data) {
  for (const auto& b : data) {
    if (b.kind != spec.kind) throw Error(Errc::invalid_argument, "window batch built for a different model kind");
  }
}

}  // namespace

std::string_view to_string(StopReason r) { return r == StopReason::plateau ? "plateau" : "max_epochs"; }

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.model_kind = kind;
  if (kind == ModelKind::s2p) {
    c.batch_size = 4096;
    c.plateau_patience_lr = 0;
    c.stop_patience = 10;
    c.max_epochs = 100;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || batch_size == 0 || stop_patience == 0 || max_epochs == 0 ||
      !(lr_factor > 0.0)) {
    throw Error(Errc::invalid_argument, "train config values must be positive");
  }
}

PlateauSchedule::PlateauSchedule(const TrainConfig& config)
    : config_(config), step_size_(config.step_size), best_(std::numeric_limits<double>::infinity()) {
  config_.validate();
}

PlateauSchedule::Decision PlateauSchedule::observe(double val_loss) {
  ++epoch_;
  Decision d;
  if (val_loss < best_) {
    best_ = val_loss;
    since_improvement_ = 0;
    since_reduction_ = 0;
    d.improved = true;
  } else {
    ++since_improvement_;
    ++since_reduction_;
  }
  if (config_.plateau_patience_lr > 0 && since_reduction_ >= config_.plateau_patience_lr) {
    step_size_ *= config_.lr_factor;
    since_reduction_ = 0;
    d.reduce_lr = true;
  }
  if (since_improvement_ >= config_.stop_patience) {
    d.stop = true;
    d.reason = StopReason::plateau;
  } else if (epoch_ >= config_.max_epochs) {
    d.stop = true;
    d.reason = StopReason::max_epochs;
  }
  return d;
}

template <typename T>
double evaluate_loss(const NetworkSpec& spec, const ParamSet<T>& params, const NormStats& stats,
                     std::span<const WindowBatch> data) {
  check_kind(spec, data);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<std::uint8_t> mask;
  for (const auto& ref : valid_windows(data)) {
    const WindowBatch& b = data[ref.batch];
    const FeatureMap<T> x = window_input<T>(b, ref.window, spec, stats);
    const FeatureMap<T> y = window_target<T>(b, ref.window, stats, mask);
    const FeatureMap<T> p = forward(spec, params, x);
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (!mask[j]) continue;
      const double d = static_cast<double>(p(0, j)) - static_cast<double>(y(0, j));
      total += d * d;
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::no_valid_targets, "no valid windows to evaluate");
  return total / static_cast<double>(count);
}

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, const NormStats& stats, std::span<const WindowBatch> train_data,
                     std::span<const WindowBatch> val_data, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  spec.validate();
  if (config.model_kind != spec.kind) throw Error(Errc::invalid_argument, "train config kind differs from network");
  check_kind(spec, train_data);
  check_kind(spec, val_data);
  std::vector<WindowRef> order = valid_windows(train_data);
  if (order.empty()) throw Error(Errc::no_valid_targets, "no valid training windows");
  if (valid_windows(val_data).empty()) throw Error(Errc::no_valid_targets, "no valid validation windows");

  TrainResult<T> result{init_params<T>(spec, config.seed), {}};
  ParamSet<T> params = result.params;
  ParamSet<T> grads(spec);
  AdamState<T> adam(params.size(), AdamHyper{config.step_size});
  PlateauSchedule schedule(config);
  Rng shuffle_rng(config.seed ^ 0x5eed5eed5eedULL);

  ForwardCache<T> cache;
  std::vector<FeatureMap<T>> inputs, targets;
  std::vector<std::vector<std::uint8_t>> masks;
  const auto t_start = Clock::now();

  auto diverged = [&](const std::string& what) {
    result.report.total_seconds = seconds_since(t_start);
    return TrainDiverged(what, result.report);
  };

  while (true) {
    const auto t_epoch = Clock::now();
    // Fisher-Yates with the platform-independent generator.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_sse = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::size_t n = end - begin;
      inputs.resize(n);
      targets.resize(n);
      masks.resize(n);
      std::size_t batch_count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const WindowRef& ref = order[begin + i];
        inputs[i] = window_input<T>(train_data[ref.batch], ref.window, spec, stats);
        targets[i] = window_target<T>(train_data[ref.batch], ref.window, stats, masks[i]);
        for (auto m : masks[i]) batch_count += m;
      }
      if (batch_count == 0) continue;

      grads.zero();
      for (std::size_t i = 0; i < n; ++i) {
        forward(spec, params, inputs[i], cache);
        LossResult<T> loss = mse_loss(cache.output(), targets[i], masks[i], batch_count);
        epoch_sse += loss.loss * static_cast<double>(batch_count);
        backward(spec, params, cache, loss.grad, grads);
      }
      epoch_count += batch_count;
      if (!std::isfinite(epoch_sse)) throw diverged("training loss is not finite");
      try {
        adam.hyper.step_size = schedule.step_size();
        adam_step<T>(params.values(), grads.values(), adam);
      } catch (const Error& e) {
        if (e.code() == Errc::diverged) throw diverged(e.what());
        throw;
      }
    }

    EpochRecord rec;
    rec.epoch = schedule.epoch() + 1;
    rec.train_loss = epoch_sse / static_cast<double>(epoch_count);
    rec.step_size = schedule.step_size();
    rec.val_loss = evaluate_loss(spec, params, stats, val_data);
    rec.seconds = seconds_since(t_epoch);
    if (!std::isfinite(rec.val_loss)) throw diverged("validation loss is not finite");

    const PlateauSchedule::Decision d = schedule.observe(rec.val_loss);
    result.report.epochs.push_back(rec);
    if (d.improved) {
      result.params = params;
      result.report.best_epoch = rec.epoch;
      result.report.best_val_loss = rec.val_loss;
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (d.stop) {
      result.report.stop_reason = d.reason;
      break;
    }
  }
  result.report.total_seconds = seconds_since(t_start);
  return result;
}

template TrainResult<float> train(const NetworkSpec&, const NormStats&, std::span<const WindowBatch>,
                                  std::span<const WindowBatch>, const TrainConfig&, const TrainHooks&);
template TrainResult<double> train(const NetworkSpec&, const NormStats&, std::span<const WindowBatch>,
                                   std::span<const WindowBatch>, const TrainConfig&, const TrainHooks&);
template double evaluate_loss(const NetworkSpec&, const ParamSet<float>&, const NormStats&,
                              std::span<const WindowBatch>);
template double evaluate_loss(const NetworkSpec&, const ParamSet<double>&, const NormStats&,
                              std::span<const WindowBatch>);

}  // namespace nilm
