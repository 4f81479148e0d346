#include "nilm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nilm/error.hpp"

namespace nilm {

nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"in_channels", l.in_channels},
                      {"out_channels", l.out_channels},
                      {"width", l.width},
                      {"dilation", l.dilation},
                      {"activation", std::string(to_string(l.activation))},
                      {"has_bias", l.has_bias}});
  }
  nlohmann::json j = {{"kind", std::string(to_string(spec.kind))}, {"layers", layers}};
  if (spec.kind == ModelKind::s2p) j["s2p_window"] = spec.s2p_window;
  return j;
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec spec;
    spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& l : j.at("layers")) {
      spec.layers.push_back({l.at("in_channels").get<std::size_t>(), l.at("out_channels").get<std::size_t>(),
                             l.at("width").get<std::size_t>(), l.at("dilation").get<std::size_t>(),
                             activation_from_string(l.at("activation").get<std::string>()),
                             l.at("has_bias").get<bool>()});
    }
    spec.s2p_window = j.value("s2p_window", std::size_t{0});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_format, std::string("network spec: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::bad_format, std::string("network spec: ") + e.what());
  }
}

nlohmann::json to_json(const NormStats& s) {
  return {{"agg_mean", s.agg_mean}, {"agg_std", s.agg_std}, {"on_mean", s.on_mean},
          {"on_std", s.on_std}, {"on_threshold", s.on_threshold}};
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
  try {
    return {j.at("agg_mean").get<double>(), j.at("agg_std").get<double>(), j.at("on_mean").get<double>(),
            j.at("on_std").get<double>(), j.at("on_threshold").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_format, std::string("norm stats: ") + e.what());
  }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, const ParamSet<T>& params) {
  if (params.size() != param_count(meta.spec)) {
    throw Error(Errc::invalid_argument, "parameter set does not match the network spec");
  }
  const nlohmann::json header = {{"network", to_json(meta.spec)},
                                 {"norm_stats", to_json(meta.stats)},
                                 {"appliance", meta.appliance},
                                 {"sample_interval", meta.sample_interval},
                                 {"param_count", params.size()},
                                 {"dtype", "float32-le"}};
  std::string blob(params.size() * 4, '\0');
  auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(blob.data() + 4 * i, &bits, 4);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << kCheckpointMagic << header.dump() << '\n' << blob;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.compare(0, kCheckpointMagic.size(), kCheckpointMagic) != 0) {
    throw Error(Errc::bad_format, path.string() + ": not a checkpoint (magic mismatch)");
  }
  const std::size_t header_end = data.find('\n', kCheckpointMagic.size());
  if (header_end == std::string::npos) throw Error(Errc::corrupt, path.string() + ": truncated header");

  Checkpoint<T> ck;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(data.begin() + static_cast<std::ptrdiff_t>(kCheckpointMagic.size()),
                                              data.begin() + static_cast<std::ptrdiff_t>(header_end));
    ck.meta.spec = network_spec_from_json(header.at("network"));
    ck.meta.stats = norm_stats_from_json(header.at("norm_stats"));
    ck.meta.appliance = header.at("appliance").get<std::string>();
    ck.meta.sample_interval = header.at("sample_interval").get<std::int64_t>();
    count = header.at("param_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_format, path.string() + ": header: " + e.what());
  }
  if (count != param_count(ck.meta.spec)) {
    throw Error(Errc::corrupt, path.string() + ": header parameter count disagrees with the network spec");
  }
  const std::size_t blob_size = data.size() - header_end - 1;
  if (blob_size != count * 4) {
    throw Error(Errc::corrupt, path.string() + ": parameter blob has " + std::to_string(blob_size) +
                                   " bytes, expected " + std::to_string(count * 4));
  }
  ck.params = ParamSet<T>(ck.meta.spec);
  auto values = ck.params.values();
  const char* blob = data.data() + header_end + 1;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, blob + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    values[i] = static_cast<T>(std::bit_cast<float>(bits));
  }
  return ck;
}

template void save_checkpoint(const std::filesystem::path&, const CheckpointMeta&, const ParamSet<float>&);
template void save_checkpoint(const std::filesystem::path&, const CheckpointMeta&, const ParamSet<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace nilm
