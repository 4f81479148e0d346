#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace nilm {

enum class SensorKind { aggregate_30A, aggregate_100A, aggregate, iam_1s, iam_5s };

std::string_view to_string(SensorKind k);
SensorKind sensor_kind_from_string(std::string_view s);

// Irregular meter readings: integer Unix seconds, strictly increasing; watts.
struct RawSeries {
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
  SensorKind kind = SensorKind::aggregate;

  std::size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }

  // Throws invalid-argument unless timestamps strictly increase and values are finite.
  void validate() const;
};

// Power trace on a fixed grid with a per-sample validity mask. Invalid samples
// carry value 0 and must not be interpreted.
struct PowerSeries {
  std::int64_t start_time = 0;
  std::int64_t interval = 8;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  std::int64_t time_at(std::size_t i) const { return start_time + static_cast<std::int64_t>(i) * interval; }
  std::int64_t end_time() const { return time_at(size()); }
  std::size_t valid_count() const;

  // Fully valid series of `values`.
  static PowerSeries from_values(std::int64_t start, std::int64_t interval, std::vector<double> values);

  friend bool operator==(const PowerSeries&, const PowerSeries&) = default;
};

// Crops two series on the same grid to their common time span.
void align(PowerSeries& a, PowerSeries& b);

}  // namespace nilm
