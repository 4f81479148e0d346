#include "nilm/pipeline.hpp"

#include <cmath>
#include <string>

#include "nilm/error.hpp"

namespace nilm {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

template <typename Pred>
Moments moments(std::span<const PowerSeries> series, Pred include) {
  Moments m;
  double sum = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.valid[i] && include(s.values[i])) {
        sum += s.values[i];
        ++m.count;
      }
    }
  }
  if (m.count == 0) return m;
  m.mean = sum / static_cast<double>(m.count);
  double ss = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.valid[i] && include(s.values[i])) ss += (s.values[i] - m.mean) * (s.values[i] - m.mean);
    }
  }
  m.std = std::sqrt(ss / static_cast<double>(m.count));
  return m;
}

void require_same_grid(const PowerSeries& a, const PowerSeries& b) {
  if (a.start_time != b.start_time || a.interval != b.interval || a.size() != b.size()) {
    throw Error(Errc::invalid_argument, "aggregate and target series are not aligned (use align())");
  }
}

void check_std(const NormStats& s) {
  if (!(s.agg_std > 0.0) || !(s.on_std > 0.0)) throw Error(Errc::degenerate_std, "zero standard deviation");
}

// Replicate-padded copy of the aggregate with `left` samples before index 0.
std::vector<double> pad_replicate(const PowerSeries& agg, std::size_t left, std::size_t total) {
  std::size_t first = 0;
  while (first < agg.size() && !agg.valid[first]) ++first;
  std::size_t last = agg.size();
  while (last > 0 && !agg.valid[last - 1]) --last;
  const double head = first < agg.size() ? agg.values[first] : 0.0;
  const double tail = last > 0 ? agg.values[last - 1] : 0.0;
  std::vector<double> out(total);
  for (std::size_t p = 0; p < total; ++p) {
    if (p < left) {
      out[p] = head;
    } else if (p - left < agg.size()) {
      out[p] = agg.values[p - left];
    } else {
      out[p] = tail;
    }
  }
  return out;
}

WindowBatch make_batch(ModelKind kind, const PowerSeries& aggregate, const PowerSeries& target,
                       const WindowGeometry& g, std::size_t windows) {
  WindowBatch b;
  b.kind = kind;
  b.geometry = g;
  b.start_time = aggregate.start_time;
  b.interval = aggregate.interval;
  b.series_length = aggregate.size();
  b.padded_aggregate = pad_replicate(aggregate, g.context_left, (windows - 1) * g.stride + g.input_len);
  b.target.assign(target.values.begin(), target.values.end());
  b.target_valid.resize(aggregate.size());
  for (std::size_t i = 0; i < aggregate.size(); ++i) {
    b.target_valid[i] = aggregate.valid[i] && target.valid[i];
    if (!target.valid[i]) b.target[i] = 0.0;
  }
  return b;
}

}  // namespace

NormStats fit_norm_stats(std::span<const PowerSeries> aggregates, std::span<const PowerSeries> appliances,
                         double on_threshold) {
  const Moments agg = moments(aggregates, [](double) { return true; });
  if (agg.count == 0) throw Error(Errc::cannot_fit, "no valid aggregate samples");
  const Moments on = moments(appliances, [&](double v) { return v > on_threshold; });
  if (on.count == 0) {
    throw Error(Errc::cannot_fit, "appliance never exceeds the on-threshold of " + std::to_string(on_threshold) + " W");
  }
  NormStats s{agg.mean, agg.std, on.mean, on.std, on_threshold};
  check_std(s);
  return s;
}

void s2p_standardize(std::span<double> window, const NormStats& stats) {
  check_std(stats);
  for (double& x : window) x = (x - stats.agg_mean) / stats.agg_std;
}

void s2p_destandardize(std::span<double> window, const NormStats& stats) {
  for (double& x : window) x = x * stats.agg_std + stats.agg_mean;
}

double s2p_target(double watts, const NormStats& stats) {
  check_std(stats);
  return (watts - stats.on_mean) / stats.on_std;
}

double s2p_target_inverse(double value, const NormStats& stats) { return value * stats.on_std + stats.on_mean; }

double fcn_normalize(std::span<double> window, const NormStats& stats) {
  if (!(stats.agg_std > 0.0)) throw Error(Errc::degenerate_std, "aggregate std is zero");
  double mean = 0.0;
  for (double x : window) mean += x;
  mean /= static_cast<double>(window.size());
  if (!(mean > 0.0)) throw Error(Errc::degenerate_window, "window mean is not positive");
  for (double& x : window) x = (x - mean) / stats.agg_std;
  return mean;
}

void fcn_denormalize(std::span<double> window, double window_mean, const NormStats& stats) {
  for (double& x : window) x = x * stats.agg_std + window_mean;
}

double fcn_target(double watts, const NormStats& stats) {
  if (!(stats.on_mean > 0.0)) throw Error(Errc::degenerate_std, "on-power mean must be positive");
  return watts / stats.on_mean;
}

double fcn_target_inverse(double value, const NormStats& stats) { return value * stats.on_mean; }

std::size_t WindowBatch::valid_window_count() const {
  std::size_t n = 0;
  for (const auto& w : windows) n += w.valid;
  return n;
}

WindowGeometry fcn_geometry(std::size_t receptive_field, std::size_t output_len) {
  if (receptive_field == 0) throw Error(Errc::invalid_argument, "receptive field must be >= 1");
  WindowGeometry g;
  g.output_len = output_len == 0 ? receptive_field : output_len;
  g.input_len = g.output_len + receptive_field - 1;
  g.stride = g.output_len;
  g.context_left = (receptive_field - 1) / 2;
  g.midpoint_offset = g.context_left;
  return g;
}

WindowGeometry s2p_geometry(std::size_t window) {
  if (window == 0 || window % 2 == 0) throw Error(Errc::invalid_argument, "s2p window must be odd");
  WindowGeometry g;
  g.input_len = window;
  g.output_len = 1;
  g.stride = 1;
  g.context_left = (window - 1) / 2;
  g.midpoint_offset = g.context_left;
  return g;
}

WindowBatch make_fcn_windows(const PowerSeries& aggregate, const PowerSeries& target,
                             const WindowGeometry& geometry) {
  require_same_grid(aggregate, target);
  const std::size_t n = aggregate.size();
  const std::size_t out = geometry.output_len;
  if (out == 0 || geometry.stride != out) throw Error(Errc::invalid_argument, "fcn windows need stride == output_len");
  if (n < out) {
    throw Error(Errc::too_short, "series of " + std::to_string(n) + " samples is shorter than one output window (" +
                                     std::to_string(out) + ")");
  }
  const std::size_t count = (n + out - 1) / out;
  WindowBatch b = make_batch(ModelKind::fcn, aggregate, target, geometry, count);
  b.windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window win{w * out, true};
    for (std::size_t i = win.output_start; i < std::min(n, win.output_start + out); ++i) {
      if (!b.target_valid[i]) {
        win.valid = false;
        break;
      }
    }
    if (win.valid) {
      double mean = 0.0;
      for (std::size_t p = 0; p < geometry.input_len; ++p) mean += b.padded_aggregate[win.output_start + p];
      win.valid = mean > 0.0;
    }
    b.windows.push_back(win);
  }
  return b;
}

WindowBatch make_s2p_windows(const PowerSeries& aggregate, const PowerSeries& target,
                             const WindowGeometry& geometry) {
  require_same_grid(aggregate, target);
  if (geometry.output_len != 1 || geometry.input_len % 2 == 0) {
    throw Error(Errc::invalid_argument, "s2p windows need an odd input length and one output");
  }
  const std::size_t n = aggregate.size();
  if (n == 0) throw Error(Errc::too_short, "empty series");
  WindowBatch b = make_batch(ModelKind::s2p, aggregate, target, geometry, n);
  b.windows.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.windows[i] = {i, b.target_valid[i] != 0};
  return b;
}

template <typename T>
FeatureMap<T> window_input(const WindowBatch& batch, std::size_t w, const NetworkSpec& spec,
                           const NormStats& stats, double* mean_out) {
  const Window& win = batch.windows.at(w);
  const WindowGeometry& g = batch.geometry;
  std::vector<double> x(batch.padded_aggregate.begin() + static_cast<std::ptrdiff_t>(win.output_start),
                        batch.padded_aggregate.begin() + static_cast<std::ptrdiff_t>(win.output_start + g.input_len));
  if (batch.kind == ModelKind::fcn) {
    const double mean = fcn_normalize(x, stats);
    if (mean_out) *mean_out = mean;
    FeatureMap<T> m(1, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m(0, i) = static_cast<T>(x[i]);
    return m;
  }
  s2p_standardize(x, stats);
  const auto [left, right] = s2p_padding(spec);
  FeatureMap<T> m(1, left + x.size() + right);
  for (std::size_t i = 0; i < x.size(); ++i) m(0, left + i) = static_cast<T>(x[i]);
  return m;
}

template <typename T>
FeatureMap<T> window_target(const WindowBatch& batch, std::size_t w, const NormStats& stats,
                            std::vector<std::uint8_t>& mask) {
  const Window& win = batch.windows.at(w);
  const std::size_t len = batch.geometry.output_len;
  FeatureMap<T> y(1, len);
  mask.assign(len, 0);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t i = win.output_start + j;
    if (i >= batch.series_length || !batch.target_valid[i]) continue;
    const double v = batch.kind == ModelKind::fcn ? fcn_target(batch.target[i], stats)
                                                  : s2p_target(batch.target[i], stats);
    y(0, j) = static_cast<T>(v);
    mask[j] = 1;
  }
  return y;
}

template FeatureMap<float> window_input(const WindowBatch&, std::size_t, const NetworkSpec&, const NormStats&, double*);
template FeatureMap<double> window_input(const WindowBatch&, std::size_t, const NetworkSpec&, const NormStats&, double*);
template FeatureMap<float> window_target(const WindowBatch&, std::size_t, const NormStats&, std::vector<std::uint8_t>&);
template FeatureMap<double> window_target(const WindowBatch&, std::size_t, const NormStats&, std::vector<std::uint8_t>&);

}  // namespace nilm
