#pragma once

// Mini-batch Adam training with the plateau schedules of the two model
// families, early stopping, and best-epoch parameter selection.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "nilm/error.hpp"
#include "nilm/models.hpp"
#include "nilm/pipeline.hpp"

namespace nilm {

enum class StopReason { plateau, max_epochs };
std::string_view to_string(StopReason r);

struct TrainConfig {
  ModelKind model_kind = ModelKind::fcn;
  double step_size = 1e-3;
  std::size_t batch_size = 256;
  std::size_t plateau_patience_lr = 10;  // 0 disables learning-rate reduction
  double lr_factor = 0.1;
  std::size_t stop_patience = 15;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;

  // FCN: batch 256, lr x0.1 after 10 flat epochs, stop after 15, at most 200.
  // S2P: batch 4096, no lr reduction, stop after 10, at most 100.
  static TrainConfig defaults(ModelKind kind);
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double step_size = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  StopReason stop_reason = StopReason::max_epochs;
  double total_seconds = 0.0;

  std::size_t epochs_run() const { return epochs.size(); }
};

// Validation-driven schedule. An epoch improves only if its loss is strictly
// below the best so far. The lr counter restarts on improvement and after
// each reduction; the stop counter restarts only on improvement.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
    StopReason reason = StopReason::max_epochs;
  };

  explicit PlateauSchedule(const TrainConfig& config);

  Decision observe(double val_loss);

  double step_size() const { return step_size_; }
  std::size_t epoch() const { return epoch_; }
  double best() const { return best_; }

 private:
  TrainConfig config_;
  double step_size_;
  double best_;
  std::size_t epoch_ = 0;
  std::size_t since_improvement_ = 0;
  std::size_t since_reduction_ = 0;
};

template <typename T>
struct TrainResult {
  ParamSet<T> params;  // from the best validation epoch
  TrainReport report;
};

class TrainDiverged : public Error {
 public:
  TrainDiverged(const std::string& what, TrainReport partial)
      : Error(Errc::diverged, what), partial_(std::move(partial)) {}
  const TrainReport& partial() const { return partial_; }

 private:
  TrainReport partial_;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Loss is MSE on normalized targets, averaged over all valid target samples of
// a mini-batch. Only windows flagged valid are used. Throws TrainDiverged on a
// non-finite loss or gradient.
template <typename T>
TrainResult<T> train(const NetworkSpec& spec, const NormStats& stats, std::span<const WindowBatch> train_data,
                     std::span<const WindowBatch> val_data, const TrainConfig& config, const TrainHooks& hooks = {});

// Mean squared error (normalized space) over every valid window.
template <typename T>
double evaluate_loss(const NetworkSpec& spec, const ParamSet<T>& params, const NormStats& stats,
                     std::span<const WindowBatch> data);

}  // namespace nilm
