#pragma once

// Checkpoint file: the 6 magic bytes "NILM1\n", a single-line JSON header
// terminated by '\n' (network spec, normalization stats, appliance, sample
// interval, parameter count), then the parameters as little-endian float32,
// layer by layer, weights ([out][in][tap]) then biases.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "nilm/models.hpp"
#include "nilm/pipeline.hpp"

namespace nilm {

inline constexpr std::string_view kCheckpointMagic = "NILM1\n";

struct CheckpointMeta {
  NetworkSpec spec;
  NormStats stats;
  std::string appliance;
  std::int64_t sample_interval = 8;
};

template <typename T>
struct Checkpoint {
  CheckpointMeta meta;
  ParamSet<T> params;
};

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, const ParamSet<T>& params);

// Throws bad-format (magic or header) or corrupt (blob length mismatch).
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace nilm
