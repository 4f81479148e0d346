#include <string>

#include "nilm/models.hpp"

namespace nilm {

std::string_view to_string(ModelKind k) { return k == ModelKind::fcn ? "fcn" : "s2p"; }

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "fcn") return ModelKind::fcn;
  if (s == "s2p") return ModelKind::s2p;
  throw Error(Errc::invalid_argument, "unknown model kind '" + std::string(s) + "'");
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw Error(Errc::invalid_argument, "network has no layers");
  for (const auto& l : layers) l.validate();
  if (layers.front().in_channels != 1) throw Error(Errc::invalid_argument, "first layer must take 1 channel");
  if (layers.back().out_channels != 1) throw Error(Errc::invalid_argument, "last layer must emit 1 channel");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i - 1].out_channels != layers[i].in_channels) {
      throw Error(Errc::invalid_argument, "channel mismatch between layers " + std::to_string(i - 1) +
                                              " and " + std::to_string(i));
    }
  }
  if (kind == ModelKind::s2p) {
    if (s2p_window == 0 || s2p_window % 2 == 0) {
      throw Error(Errc::invalid_argument, "s2p window must be odd");
    }
    if (receptive_field(*this) < s2p_window) {
      throw Error(Errc::invalid_argument, "s2p receptive field shorter than its window");
    }
  }
}

NetworkSpec build_fcn(const FcnConfig& config) {
  if (config.filters == 0 || config.initial_width == 0 || config.dilated_layers == 0 ||
      config.dilation_base == 0) {
    throw Error(Errc::invalid_argument, "fcn config values must be >= 1");
  }
  const std::size_t f = config.filters;
  NetworkSpec spec;
  spec.kind = ModelKind::fcn;
  spec.layers.push_back({1, f, config.initial_width, 1, Activation::relu, true});
  std::size_t dilation = 1;
  for (std::size_t i = 0; i < config.dilated_layers; ++i) {
    dilation *= config.dilation_base;
    spec.layers.push_back({f, f, 3, dilation, Activation::relu, true});
  }
  spec.layers.push_back({f, f, 1, 1, Activation::relu, true});
  spec.layers.push_back({f, 1, 1, 1, Activation::linear, true});
  spec.validate();
  return spec;
}

NetworkSpec build_s2p(const S2pConfig& config) {
  if (config.window == 0 || config.window % 2 == 0) {
    throw Error(Errc::invalid_argument, "s2p window must be odd");
  }
  if (config.stages.empty() || config.hidden_units == 0) {
    throw Error(Errc::invalid_argument, "s2p needs at least one conv stage and hidden units");
  }
  NetworkSpec spec;
  spec.kind = ModelKind::s2p;
  spec.s2p_window = config.window;
  std::size_t channels = 1;
  for (const auto& stage : config.stages) {
    if (stage.filters == 0 || stage.width == 0) {
      throw Error(Errc::invalid_argument, "s2p stage values must be >= 1");
    }
    spec.layers.push_back({channels, stage.filters, stage.width, 1, Activation::relu, true});
    channels = stage.filters;
  }
  spec.layers.push_back(
      {channels, config.hidden_units, config.window, 1, Activation::relu, config.hidden_bias});
  spec.layers.push_back({config.hidden_units, 1, 1, 1, Activation::linear, true});
  spec.validate();
  return spec;
}

std::size_t receptive_field(const NetworkSpec& spec) {
  std::size_t rf = 1;
  for (const auto& l : spec.layers) rf += l.shrink();
  return rf;
}

std::size_t param_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : spec.layers) n += l.param_count();
  return n;
}

std::size_t mac_count_per_output(const NetworkSpec& spec) {
  std::size_t macs = 0;
  if (spec.kind == ModelKind::fcn) {
    for (const auto& l : spec.layers) macs += l.weight_count();
    return macs;
  }
  std::size_t len = receptive_field(spec);
  for (const auto& l : spec.layers) {
    len = l.output_length(len);
    macs += len * l.weight_count();
  }
  return macs;
}

std::pair<std::size_t, std::size_t> s2p_padding(const NetworkSpec& spec) {
  if (spec.kind != ModelKind::s2p) return {0, 0};
  const std::size_t total = receptive_field(spec) - spec.s2p_window;
  return {total / 2, total - total / 2};
}

}  // namespace nilm
