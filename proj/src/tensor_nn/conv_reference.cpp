// Serial direct-sum kernels. Deliberately naive: every output element is one
// explicit sum, which makes these the oracle for the OpenMP kernels.

#include "nilm/tensor_nn.hpp"

namespace nilm::reference {

namespace {

template <typename T>
void check_input(const FeatureMap<T>& input, const LayerSpec& spec) {
  spec.validate();
  if (input.channels() != spec.in_channels) {
    throw Error(Errc::invalid_argument, "input channels do not match layer");
  }
}

template <typename T>
double pre_activation(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec,
                      std::size_t o, std::size_t t) {
  double sum = spec.has_bias ? static_cast<double>(params.biases[o]) : 0.0;
  for (std::size_t c = 0; c < spec.in_channels; ++c) {
    for (std::size_t k = 0; k < spec.width; ++k) {
      sum += static_cast<double>(params.weights[spec.weight_index(o, c, k)]) *
             static_cast<double>(input(c, t + k * spec.dilation));
    }
  }
  return sum;
}

}  // namespace

template <typename T>
FeatureMap<T> conv1d_forward(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                             const LayerSpec& spec) {
  check_input(input, spec);
  check_params<T>(spec, params);
  const std::size_t len = spec.output_length(input.length());
  FeatureMap<T> out(spec.out_channels, len);
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double v = pre_activation(input, params, spec, o, t);
      if (spec.activation == Activation::relu && v < 0.0) v = 0.0;
      out(o, t) = static_cast<T>(v);
    }
  }
  return out;
}

template <typename T>
ConvGradients<T> conv1d_backward(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                 std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec) {
  check_input(cached_input, spec);
  check_params<T>(spec, params);
  const std::size_t len = spec.output_length(cached_input.length());
  if (grad_output.channels() != spec.out_channels || grad_output.length() != len) {
    throw Error(Errc::invalid_argument, "grad_output shape does not match forward output");
  }
  ConvGradients<T> g{FeatureMap<T>(spec.in_channels, cached_input.length()),
                     std::vector<T>(spec.weight_count(), T(0)),
                     std::vector<T>(spec.has_bias ? spec.out_channels : 0, T(0))};
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double go = grad_output(o, t);
      if (spec.activation == Activation::relu &&
          !(pre_activation(cached_input, params, spec, o, t) > 0.0)) {
        go = 0.0;
      }
      if (go == 0.0) continue;
      if (spec.has_bias) g.grad_biases[o] += static_cast<T>(go);
      for (std::size_t c = 0; c < spec.in_channels; ++c) {
        for (std::size_t k = 0; k < spec.width; ++k) {
          const std::size_t src = t + k * spec.dilation;
          const std::size_t wi = spec.weight_index(o, c, k);
          g.grad_weights[wi] += static_cast<T>(go * cached_input(c, src));
          g.grad_input(c, src) += static_cast<T>(go * params.weights[wi]);
        }
      }
    }
  }
  return g;
}

template FeatureMap<float> conv1d_forward(const FeatureMap<float>&, LayerParams<const float>,
                                          const LayerSpec&);
template FeatureMap<double> conv1d_forward(const FeatureMap<double>&, LayerParams<const double>,
                                           const LayerSpec&);
template ConvGradients<float> conv1d_backward(const FeatureMap<float>&, const FeatureMap<float>&,
                                              LayerParams<const float>, const LayerSpec&);
template ConvGradients<double> conv1d_backward(const FeatureMap<double>&, const FeatureMap<double>&,
                                               LayerParams<const double>, const LayerSpec&);

}  // namespace nilm::reference
