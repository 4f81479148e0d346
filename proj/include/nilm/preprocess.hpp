#pragma once

// Cleaning of raw meter readings into 8-second PowerSeries:
// merge (30 A / 100 A aggregate sensors) -> despike -> fill_gaps -> resample.

#include <cstdint>
#include <optional>
#include <string_view>

#include "nilm/series.hpp"

namespace nilm {

// Readings strictly above this use the 100 A sensor.
inline constexpr double kMergeSwitchWatts = 4000.0;

inline constexpr double kAggregateSpikeWatts = 20000.0;
inline constexpr double kHighPowerIamSpikeWatts = 15000.0;  // electric shower, electric cooker
inline constexpr double kIamSpikeWatts = 4000.0;

inline constexpr std::int64_t kResampleInterval = 8;

struct GapRule {
  std::int64_t max_gap = 60;
  bool inclusive = false;  // gap == max_gap is filled only when inclusive

  bool fillable(std::int64_t gap) const { return inclusive ? gap <= max_gap : gap < max_gap; }
};

// Aggregate: gaps shorter than one minute. IAM: gaps up to and including one hour.
inline constexpr GapRule kAggregateGapRule{60, false};
inline constexpr GapRule kIamGapRule{3600, true};

// Spike threshold for an appliance name (shower and cooker get the high-power limit).
double appliance_spike_threshold(std::string_view appliance);

// Nearest-neighbour join within half the 100 A sampling interval. At matched
// timestamps the 100 A value is used when it exceeds 4 kW, otherwise the 30 A
// value; 100 A readings with no 30 A partner fill the 30 A gaps.
// Throws empty-input or no-overlap.
RawSeries merge_aggregate(const RawSeries& s30, const RawSeries& s100);

// Values strictly above `threshold` become 0.
RawSeries despike(RawSeries series, double threshold);
PowerSeries despike(PowerSeries series, double threshold);

// Places readings on a regular grid (`grid` seconds) spanning first..last
// reading. Between two consecutive readings the earlier value is carried
// forward when the gap satisfies `rule`; otherwise the interior is invalid.
// Throws empty-input.
PowerSeries fill_gaps(const RawSeries& series, GapRule rule, std::int64_t grid = 1);

// Mean over epoch-aligned bins [t, t + target). A bin is valid only if it is
// fully covered by valid input samples. `target` must be a multiple of the
// input interval.
PowerSeries resample(const PowerSeries& series, std::int64_t target = kResampleInterval);

// Mean of the readings falling in each bin; empty bins are invalid.
PowerSeries resample(const RawSeries& series, std::int64_t target = kResampleInterval);

struct AggregateSources {
  RawSeries s30;
  std::optional<RawSeries> s100;
};

// Full aggregate chain: merge (if a 100 A series is present), despike at 20 kW,
// fill gaps < 60 s, resample to 8 s.
PowerSeries preprocess_aggregate(const AggregateSources& sources);

// Full IAM chain: despike at the appliance threshold, fill gaps <= 1 h, resample.
PowerSeries preprocess_appliance(const RawSeries& raw, std::string_view appliance);

}  // namespace nilm
