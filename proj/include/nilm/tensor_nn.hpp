#pragma once

// Minimal numerical engine for 1-D dilated convolution networks: feature maps,
// layer descriptions, forward/backward kernels, MSE loss and Adam.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "nilm/error.hpp"

namespace nilm {

enum class Activation { relu, linear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct LayerSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t width = 1;
  std::size_t dilation = 1;
  Activation activation = Activation::linear;
  bool has_bias = true;

  // Samples lost by a valid convolution: (width - 1) * dilation.
  std::size_t shrink() const { return (width - 1) * dilation; }

  // Valid-convolution output length; throws window-too-short.
  std::size_t output_length(std::size_t input_length) const;

  std::size_t weight_count() const { return out_channels * in_channels * width; }
  std::size_t param_count() const { return weight_count() + (has_bias ? out_channels : 0); }

  // Throws invalid-argument on zero channels, width or dilation.
  void validate() const;

  std::size_t weight_index(std::size_t o, std::size_t c, std::size_t k) const {
    return (o * in_channels + c) * width + k;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Channel-major (channels x length) dense map.
template <typename T>
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t length, T fill = T(0))
      : channels_(channels), length_(length), values_(channels * length, fill) {}
  FeatureMap(std::size_t channels, std::size_t length, std::vector<T> values);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<T> row(std::size_t c) { return {values_.data() + c * length_, length_}; }
  std::span<const T> row(std::size_t c) const { return {values_.data() + c * length_, length_}; }

  T& operator()(std::size_t c, std::size_t t) { return values_[c * length_ + t]; }
  const T& operator()(std::size_t c, std::size_t t) const { return values_[c * length_ + t]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  // Reshape in place, reusing capacity; contents are unspecified afterwards.
  void resize(std::size_t channels, std::size_t length) {
    channels_ = channels;
    length_ = length;
    values_.resize(channels * length);
  }

  bool all_finite() const;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<T> values_;
};

// Non-owning view of one layer's weights ([out][in][tap]) and biases ([out]).
// `biases` is empty when the layer has no bias.
template <typename T>
struct LayerParams {
  std::span<T> weights;
  std::span<T> biases;

  operator LayerParams<const T>() const { return {weights, biases}; }
};

// Owning storage for a LayerParams view, used by tests and single-layer callers.
template <typename T>
struct LayerBuffer {
  std::vector<T> weights;
  std::vector<T> biases;

  explicit LayerBuffer(const LayerSpec& spec)
      : weights(spec.weight_count(), T(0)), biases(spec.has_bias ? spec.out_channels : 0, T(0)) {}

  LayerParams<T> view() { return {weights, biases}; }
  LayerParams<const T> view() const { return {weights, biases}; }
};

// Checks that `params` matches the shapes required by `spec`.
template <typename T>
void check_params(const LayerSpec& spec, std::type_identity_t<LayerParams<const T>> params);

// ---------------------------------------------------------------------------
// Convolution kernels. `nilm::` functions are the OpenMP kernels used by the
// networks; `nilm::reference::` holds serial direct-sum versions for testing.

// out[o][t] = act(bias[o] + sum_{c,k} w[o][c][k] * in[c][t + k*dilation]).
template <typename T>
FeatureMap<T> conv1d_forward(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                             const LayerSpec& spec);

// Writes into `output` (resized as needed) to let callers reuse buffers.
template <typename T>
void conv1d_forward_into(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                         const LayerSpec& spec, FeatureMap<T>& output);

template <typename T>
struct ConvGradients {
  FeatureMap<T> grad_input;
  std::vector<T> grad_weights;
  std::vector<T> grad_biases;
};

// Gradients of the forward map, recomputing the activation mask from the input.
template <typename T>
ConvGradients<T> conv1d_backward(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                 std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec);

// Accumulating form used by the network: `cached_output` is the post-activation
// forward output (relu' is 1 exactly where the output is positive). Parameter
// gradients are added into `grad_params`; `grad_input` is overwritten unless null.
template <typename T>
void conv1d_backward_accumulate(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                const FeatureMap<T>& cached_output, std::type_identity_t<LayerParams<const T>> params,
                                const LayerSpec& spec, LayerParams<T> grad_params,
                                FeatureMap<T>* grad_input);

namespace reference {

template <typename T>
FeatureMap<T> conv1d_forward(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                             const LayerSpec& spec);

template <typename T>
ConvGradients<T> conv1d_backward(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                 std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec);

}  // namespace reference

// ---------------------------------------------------------------------------
// Loss.

template <typename T>
struct LossResult {
  double loss = 0.0;
  FeatureMap<T> grad;
  std::size_t count = 0;
};

// Mean squared error over positions where `mask` is non-zero (all positions when
// `mask` is empty). `normalizer` overrides the divisor N, which lets mini-batch
// callers average across windows. Throws no-valid-targets on an empty mask.
template <typename T>
LossResult<T> mse_loss(const FeatureMap<T>& pred, const FeatureMap<T>& target,
                       std::span<const std::uint8_t> mask = {}, std::size_t normalizer = 0);

// ---------------------------------------------------------------------------
// Adam.

struct AdamHyper {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : first_moment(n, T(0)), second_moment(n, T(0)), hyper(h) {}
};

// Bias-corrected Adam update of `params` in place. Throws diverged (leaving
// params and state untouched) if any gradient is non-finite.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state);

}  // namespace nilm
