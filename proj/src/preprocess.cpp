#include "nilm/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "nilm/error.hpp"

namespace nilm {

namespace {

std::int64_t floor_to(std::int64_t t, std::int64_t step) {
  const std::int64_t q = t / step;
  return (t % step != 0 && t < 0 ? q - 1 : q) * step;
}

std::int64_t median_spacing(const RawSeries& s) {
  if (s.size() < 2) return 1;
  std::vector<std::int64_t> d(s.size() - 1);
  for (std::size_t i = 1; i < s.size(); ++i) d[i - 1] = s.timestamps[i] - s.timestamps[i - 1];
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

}  // namespace

double appliance_spike_threshold(std::string_view appliance) {
  std::string name(appliance);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  if (name.find("shower") != std::string::npos || name.find("cooker") != std::string::npos) {
    return kHighPowerIamSpikeWatts;
  }
  return kIamSpikeWatts;
}

RawSeries merge_aggregate(const RawSeries& s30, const RawSeries& s100) {
  if (s30.empty() || s100.empty()) throw Error(Errc::empty_input, "merge needs both aggregate sensors");
  s30.validate();
  s100.validate();
  if (s30.timestamps.back() < s100.timestamps.front() || s100.timestamps.back() < s30.timestamps.front()) {
    throw Error(Errc::no_overlap, "30 A and 100 A readings cover disjoint time ranges");
  }
  // Twice the tolerance, to stay in integer arithmetic: |dt| * 2 <= spacing.
  const std::int64_t spacing = median_spacing(s100);

  RawSeries out;
  out.kind = SensorKind::aggregate;
  std::vector<std::uint8_t> used(s100.size(), 0);
  std::size_t j = 0;
  std::vector<std::pair<std::int64_t, double>> merged;
  merged.reserve(s30.size() + s100.size());
  for (std::size_t i = 0; i < s30.size(); ++i) {
    const std::int64_t t = s30.timestamps[i];
    while (j + 1 < s100.size() && s100.timestamps[j + 1] <= t) ++j;
    // Nearest of s100[j] and s100[j + 1].
    std::size_t best = j;
    if (j + 1 < s100.size() &&
        std::llabs(s100.timestamps[j + 1] - t) < std::llabs(s100.timestamps[j] - t)) {
      best = j + 1;
    }
    double v = s30.values[i];
    if (2 * std::llabs(s100.timestamps[best] - t) <= spacing) {
      used[best] = 1;
      if (s100.values[best] > kMergeSwitchWatts) v = s100.values[best];
    }
    merged.emplace_back(t, v);
  }
  for (std::size_t k = 0; k < s100.size(); ++k) {
    if (!used[k]) merged.emplace_back(s100.timestamps[k], s100.values[k]);
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [t, v] : merged) {
    if (!out.timestamps.empty() && out.timestamps.back() == t) continue;  // 30 A wins ties
    out.timestamps.push_back(t);
    out.values.push_back(v);
  }
  return out;
}

RawSeries despike(RawSeries series, double threshold) {
  for (double& v : series.values) {
    if (v > threshold) v = 0.0;
  }
  return series;
}

PowerSeries despike(PowerSeries series, double threshold) {
  for (double& v : series.values) {
    if (v > threshold) v = 0.0;
  }
  return series;
}

PowerSeries fill_gaps(const RawSeries& series, GapRule rule, std::int64_t grid) {
  if (series.empty()) throw Error(Errc::empty_input, "fill_gaps on an empty series");
  if (grid <= 0) throw Error(Errc::invalid_argument, "grid interval must be positive");
  series.validate();
  PowerSeries out;
  out.start_time = series.timestamps.front();
  out.interval = grid;
  const std::int64_t span = series.timestamps.back() - series.timestamps.front();
  const std::size_t n = static_cast<std::size_t>(span / grid) + 1;
  out.values.assign(n, 0.0);
  out.valid.assign(n, 0);

  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t t = out.time_at(i);
    while (p + 1 < series.size() && series.timestamps[p + 1] <= t) ++p;
    if (series.timestamps[p] == t || (p + 1 < series.size() &&
                                      rule.fillable(series.timestamps[p + 1] - series.timestamps[p]))) {
      out.values[i] = series.values[p];
      out.valid[i] = 1;
    }
  }
  return out;
}

PowerSeries resample(const PowerSeries& series, std::int64_t target) {
  if (target <= 0 || series.interval <= 0 || target % series.interval != 0) {
    throw Error(Errc::invalid_argument, "resample target must be a multiple of the input interval");
  }
  PowerSeries out;
  out.interval = target;
  if (series.empty()) return out;
  out.start_time = floor_to(series.start_time, target);
  const std::int64_t last = series.time_at(series.size() - 1);
  const std::size_t bins = static_cast<std::size_t>((floor_to(last, target) - out.start_time) / target) + 1;
  const std::int64_t per_bin = target / series.interval;
  out.values.assign(bins, 0.0);
  out.valid.assign(bins, 0);

  for (std::size_t b = 0; b < bins; ++b) {
    const std::int64_t t0 = out.time_at(b);
    // Input indices covering [t0, t0 + target).
    const std::int64_t first = (t0 - series.start_time + series.interval - 1) / series.interval;
    const std::int64_t offset = t0 - series.start_time;
    if (offset < 0 || offset % series.interval != 0) continue;  // partially covered or misaligned
    const std::int64_t end = first + per_bin;
    if (end > static_cast<std::int64_t>(series.size())) continue;
    double acc = 0.0;
    bool ok = true;
    for (std::int64_t i = first; i < end; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (!series.valid[u]) {
        ok = false;
        break;
      }
      acc += series.values[u];
    }
    if (ok) {
      out.values[b] = acc / static_cast<double>(per_bin);
      out.valid[b] = 1;
    }
  }
  return out;
}

PowerSeries resample(const RawSeries& series, std::int64_t target) {
  if (target <= 0) throw Error(Errc::invalid_argument, "resample target must be positive");
  PowerSeries out;
  out.interval = target;
  if (series.empty()) return out;
  series.validate();
  out.start_time = floor_to(series.timestamps.front(), target);
  const std::size_t bins =
      static_cast<std::size_t>((floor_to(series.timestamps.back(), target) - out.start_time) / target) + 1;
  out.values.assign(bins, 0.0);
  out.valid.assign(bins, 0);
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto b = static_cast<std::size_t>((series.timestamps[i] - out.start_time) / target);
    out.values[b] += series.values[i];
    ++counts[b];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (counts[b] > 0) {
      out.values[b] /= static_cast<double>(counts[b]);
      out.valid[b] = 1;
    }
  }
  return out;
}

PowerSeries preprocess_aggregate(const AggregateSources& sources) {
  RawSeries merged = sources.s100 ? merge_aggregate(sources.s30, *sources.s100) : sources.s30;
  merged = despike(std::move(merged), kAggregateSpikeWatts);
  return resample(fill_gaps(merged, kAggregateGapRule));
}

PowerSeries preprocess_appliance(const RawSeries& raw, std::string_view appliance) {
  RawSeries clean = despike(raw, appliance_spike_threshold(appliance));
  return resample(fill_gaps(clean, kIamGapRule));
}

}  // namespace nilm
