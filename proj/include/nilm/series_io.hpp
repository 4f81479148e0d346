#pragma once

// CSV formats. Raw input: header `timestamp,power_w` (integer Unix seconds,
// watts). Processed output: `timestamp,power_w,valid` with valid in {0,1}.

#include <filesystem>

#include "nilm/series.hpp"

namespace nilm {

RawSeries read_raw_csv(const std::filesystem::path& path, SensorKind kind);
void write_raw_csv(const std::filesystem::path& path, const RawSeries& series);

// Accepts files with or without the `valid` column; timestamps must be evenly spaced.
PowerSeries read_power_csv(const std::filesystem::path& path);
void write_power_csv(const std::filesystem::path& path, const PowerSeries& series);

}  // namespace nilm
