#pragma once

// Normalization statistics, the two normalization schemes (S2P standardization
// and FCN per-window centring) and window construction for both model families.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nilm/models.hpp"
#include "nilm/series.hpp"
#include "nilm/tensor_nn.hpp"

namespace nilm {

inline constexpr double kDefaultOnThreshold = 10.0;

struct NormStats {
  double agg_mean = 0.0;
  double agg_std = 1.0;
  double on_mean = 1.0;
  double on_std = 1.0;
  double on_threshold = kDefaultOnThreshold;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Aggregate mean/std (population) over every valid training aggregate sample;
// on_mean/on_std over valid appliance samples strictly above `on_threshold`.
// Throws cannot-fit (no samples / no on-samples) or degenerate-std.
NormStats fit_norm_stats(std::span<const PowerSeries> aggregates, std::span<const PowerSeries> appliances,
                         double on_threshold = kDefaultOnThreshold);

// S2P: (x - agg_mean) / agg_std and (y - on_mean) / on_std.
void s2p_standardize(std::span<double> window, const NormStats& stats);
void s2p_destandardize(std::span<double> window, const NormStats& stats);
double s2p_target(double watts, const NormStats& stats);
double s2p_target_inverse(double value, const NormStats& stats);

// FCN: (x - mean(x)) / agg_std; returns the window mean so callers can invert.
// Throws degenerate-window when the window mean is not positive.
double fcn_normalize(std::span<double> window, const NormStats& stats);
void fcn_denormalize(std::span<double> window, double window_mean, const NormStats& stats);
double fcn_target(double watts, const NormStats& stats);
double fcn_target_inverse(double value, const NormStats& stats);

struct WindowGeometry {
  std::size_t input_len = 0;
  std::size_t output_len = 0;
  std::size_t stride = 0;
  std::size_t context_left = 0;  // input samples before the first output sample
  std::size_t midpoint_offset = 0;  // S2P: (input_len - 1) / 2

  std::size_t context_right() const { return input_len - output_len - context_left; }
};

struct Window {
  std::size_t output_start = 0;  // index of the first target sample in the series
  bool valid = true;
};

// Aligned aggregate/appliance windows over one home. The aggregate is stored
// replicate-padded (watts) so that window w's input covers
// padded[output_start, output_start + input_len). Targets beyond the series end
// are padding and never contribute.
struct WindowBatch {
  ModelKind kind = ModelKind::fcn;
  WindowGeometry geometry;
  std::int64_t start_time = 0;
  std::int64_t interval = 8;
  std::size_t series_length = 0;
  std::vector<double> padded_aggregate;
  std::vector<double> target;           // watts, series_length entries
  std::vector<std::uint8_t> target_valid;  // aggregate and appliance both valid
  std::vector<Window> windows;

  std::size_t valid_window_count() const;
};

// Geometry for an FCN with the given receptive field. Output windows default to
// the receptive field length (2053 -> input 4105 for the full-size model).
WindowGeometry fcn_geometry(std::size_t receptive_field, std::size_t output_len = 0);
WindowGeometry s2p_geometry(std::size_t window);

// Non-overlapping output windows tiling the whole series. A window is flagged
// invalid when its target region holds an invalid sample or its input mean is
// not positive. Throws too-short when the series is shorter than one output window.
WindowBatch make_fcn_windows(const PowerSeries& aggregate, const PowerSeries& target,
                             const WindowGeometry& geometry);

// Stride-1 windows, one per series sample, target at the window midpoint.
// Windows are flagged invalid where the midpoint sample is invalid.
WindowBatch make_s2p_windows(const PowerSeries& aggregate, const PowerSeries& target,
                             const WindowGeometry& geometry);

// Normalized network input for a window (1 x input_len; S2P windows get the
// model's zero padding on both sides). `mean_out` receives the FCN window mean.
template <typename T>
FeatureMap<T> window_input(const WindowBatch& batch, std::size_t w, const NetworkSpec& spec,
                           const NormStats& stats, double* mean_out = nullptr);

// Normalized target map (1 x output_len) plus a per-sample contribution mask.
template <typename T>
FeatureMap<T> window_target(const WindowBatch& batch, std::size_t w, const NormStats& stats,
                            std::vector<std::uint8_t>& mask);

}  // namespace nilm
