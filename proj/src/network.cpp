#include <cmath>

#include "nilm/models.hpp"
#include "nilm/rng.hpp"

namespace nilm {

template <typename T>
ParamSet<T>::ParamSet(const NetworkSpec& spec) {
  std::size_t offset = 0;
  for (const auto& l : spec.layers) {
    const std::size_t nb = l.has_bias ? l.out_channels : 0;
    offsets_.push_back({offset, l.weight_count(), offset + l.weight_count(), nb});
    offset += l.weight_count() + nb;
  }
  values_.assign(offset, T(0));
}

template <typename T>
LayerParams<T> ParamSet<T>::layer(std::size_t i) {
  const Slot& s = offsets_.at(i);
  return {std::span<T>(values_).subspan(s.weights_offset, s.weights_size),
          std::span<T>(values_).subspan(s.biases_offset, s.biases_size)};
}

template <typename T>
LayerParams<const T> ParamSet<T>::layer(std::size_t i) const {
  const Slot& s = offsets_.at(i);
  return {std::span<const T>(values_).subspan(s.weights_offset, s.weights_size),
          std::span<const T>(values_).subspan(s.biases_offset, s.biases_size)};
}

template <typename T>
ParamSet<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamSet<T> params(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const double fan_in = static_cast<double>(l.in_channels * l.width);
    const double fan_out = static_cast<double>(l.out_channels * l.width);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& w : params.layer(i).weights) w = static_cast<T>(rng.uniform(-limit, limit));
  }
  return params;
}

template <typename U, typename T>
ParamSet<U> convert_params(const NetworkSpec& spec, const ParamSet<T>& src) {
  ParamSet<U> out(spec);
  if (out.size() != src.size()) throw Error(Errc::invalid_argument, "parameter count mismatch");
  auto dst = out.values();
  auto s = src.values();
  for (std::size_t i = 0; i < s.size(); ++i) dst[i] = static_cast<U>(s[i]);
  return out;
}

namespace {

template <typename T>
void check_network(const NetworkSpec& spec, const ParamSet<T>& params, const FeatureMap<T>& input) {
  if (params.layer_count() != spec.layers.size()) {
    throw Error(Errc::invalid_argument, "parameter set does not match network");
  }
  if (input.channels() != 1) throw Error(Errc::invalid_argument, "network input must have 1 channel");
  if (input.length() < receptive_field(spec)) {
    throw Error(Errc::window_too_short, "input length " + std::to_string(input.length()) +
                                            " < receptive field " +
                                            std::to_string(receptive_field(spec)));
  }
}

}  // namespace

template <typename T>
void forward(const NetworkSpec& spec, const ParamSet<T>& params, const FeatureMap<T>& input,
             ForwardCache<T>& cache) {
  check_network(spec, params, input);
  cache.activations.resize(spec.layers.size() + 1);
  cache.activations[0] = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    conv1d_forward_into(cache.activations[i], params.layer(i), spec.layers[i], cache.activations[i + 1]);
  }
}

template <typename T>
FeatureMap<T> forward(const NetworkSpec& spec, const ParamSet<T>& params, const FeatureMap<T>& input) {
  check_network(spec, params, input);
  FeatureMap<T> a;
  FeatureMap<T> b;
  conv1d_forward_into(input, params.layer(0), spec.layers[0], a);
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    conv1d_forward_into(a, params.layer(i), spec.layers[i], b);
    std::swap(a, b);
  }
  return a;
}

template <typename T>
void backward(const NetworkSpec& spec, const ParamSet<T>& params, const ForwardCache<T>& cache,
              const FeatureMap<T>& grad_output, ParamSet<T>& grads) {
  if (cache.activations.size() != spec.layers.size() + 1) {
    throw Error(Errc::invalid_argument, "forward cache does not match network");
  }
  if (grads.size() != params.size()) throw Error(Errc::invalid_argument, "gradient set size mismatch");
  FeatureMap<T> upstream = grad_output;
  FeatureMap<T> downstream;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    conv1d_backward_accumulate(upstream, cache.activations[i], cache.activations[i + 1], params.layer(i),
                               spec.layers[i], grads.layer(i), i == 0 ? nullptr : &downstream);
    std::swap(upstream, downstream);
  }
}

template class ParamSet<float>;
template class ParamSet<double>;
template ParamSet<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template ParamSet<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template ParamSet<float> convert_params<float, double>(const NetworkSpec&, const ParamSet<double>&);
template ParamSet<double> convert_params<double, float>(const NetworkSpec&, const ParamSet<float>&);
template ParamSet<float> convert_params<float, float>(const NetworkSpec&, const ParamSet<float>&);
template ParamSet<double> convert_params<double, double>(const NetworkSpec&, const ParamSet<double>&);

template void forward(const NetworkSpec&, const ParamSet<float>&, const FeatureMap<float>&,
                      ForwardCache<float>&);
template void forward(const NetworkSpec&, const ParamSet<double>&, const FeatureMap<double>&,
                      ForwardCache<double>&);
template FeatureMap<float> forward(const NetworkSpec&, const ParamSet<float>&, const FeatureMap<float>&);
template FeatureMap<double> forward(const NetworkSpec&, const ParamSet<double>&,
                                    const FeatureMap<double>&);
template void backward(const NetworkSpec&, const ParamSet<float>&, const ForwardCache<float>&,
                       const FeatureMap<float>&, ParamSet<float>&);
template void backward(const NetworkSpec&, const ParamSet<double>&, const ForwardCache<double>&,
                       const FeatureMap<double>&, ParamSet<double>&);

}  // namespace nilm
