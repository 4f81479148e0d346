#include <cmath>
#include <string>

#include "nilm/tensor_nn.hpp"

namespace nilm {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw Error(Errc::bad_format, "unknown activation '" + std::string(s) + "'");
}

std::size_t LayerSpec::output_length(std::size_t input_length) const {
  if (input_length < shrink() + 1) {
    throw Error(Errc::window_too_short, "input length " + std::to_string(input_length) +
                                            " < receptive span " + std::to_string(shrink() + 1));
  }
  return input_length - shrink();
}

void LayerSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) throw Error(Errc::invalid_argument, "zero channels");
  if (width == 0) throw Error(Errc::invalid_argument, "zero filter width");
  if (dilation == 0) throw Error(Errc::invalid_argument, "zero dilation");
}

template <typename T>
FeatureMap<T>::FeatureMap(std::size_t channels, std::size_t length, std::vector<T> values)
    : channels_(channels), length_(length), values_(std::move(values)) {
  if (values_.size() != channels * length) {
    throw Error(Errc::invalid_argument, "feature map value count does not match channels x length");
  }
}

template <typename T>
bool FeatureMap<T>::all_finite() const {
  for (T v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void check_params(const LayerSpec& spec, std::type_identity_t<LayerParams<const T>> params) {
  if (params.weights.size() != spec.weight_count()) {
    throw Error(Errc::invalid_argument, "weight count " + std::to_string(params.weights.size()) +
                                            " != " + std::to_string(spec.weight_count()));
  }
  const std::size_t nb = spec.has_bias ? spec.out_channels : 0;
  if (params.biases.size() != nb) {
    throw Error(Errc::invalid_argument, "bias count " + std::to_string(params.biases.size()) +
                                            " != " + std::to_string(nb));
  }
}

template class FeatureMap<float>;
template class FeatureMap<double>;
template void check_params<float>(const LayerSpec&, LayerParams<const float>);
template void check_params<double>(const LayerSpec&, LayerParams<const double>);

}  // namespace nilm
