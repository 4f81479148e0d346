#pragma once

// Architecture builders and analytic inspectors for the dilated fully
// convolutional network (FCN) and the sequence-to-point (S2P) baseline, plus
// the parameter container and whole-network forward/backward passes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "nilm/tensor_nn.hpp"

namespace nilm {

enum class ModelKind { fcn, s2p };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct NetworkSpec {
  ModelKind kind = ModelKind::fcn;
  std::vector<LayerSpec> layers;
  // S2P only: length of the aggregate window the model sees before zero padding.
  std::size_t s2p_window = 0;

  // Throws invalid-argument unless channels chain from 1 input to 1 output.
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct FcnConfig {
  std::size_t filters = 128;
  std::size_t initial_width = 9;
  std::size_t dilated_layers = 9;
  std::size_t dilation_base = 2;
};

struct S2pStage {
  std::size_t filters;
  std::size_t width;
};

struct S2pConfig {
  std::size_t window = 599;
  std::vector<S2pStage> stages = {{30, 10}, {30, 8}, {40, 6}, {50, 5}, {50, 5}};
  std::size_t hidden_units = 1024;
  bool hidden_bias = true;
};

// [width-9 conv] + dilated width-3 convs (dilation base^1 .. base^n) + width-1
// conv, all relu with `filters` channels, then a linear width-1 conv to 1 channel.
NetworkSpec build_fcn(const FcnConfig& config = {});

// Valid conv stages over a zero-padded window (padding = total stage shrink, so
// the last stage emits exactly `window` samples), a dense layer written as a
// width-`window` convolution, and a linear width-1 output.
NetworkSpec build_s2p(const S2pConfig& config = {});

// 1 + sum over layers of (width - 1) * dilation.
std::size_t receptive_field(const NetworkSpec& spec);

// sum over layers of width * in * out (+ out when biased).
std::size_t param_count(const NetworkSpec& spec);

// FCN: steady-state multiply-accumulates per output sample.
// S2P: cost of the whole-window forward pass that yields one output point.
std::size_t mac_count_per_output(const NetworkSpec& spec);

// Zero padding (left, right) applied to an S2P window; (0, 0) for FCN.
std::pair<std::size_t, std::size_t> s2p_padding(const NetworkSpec& spec);

// ---------------------------------------------------------------------------

// Flat storage for all layer parameters: layer by layer, weights then biases.
template <typename T>
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(const NetworkSpec& spec);

  std::size_t size() const { return values_.size(); }
  std::size_t layer_count() const { return offsets_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  LayerParams<T> layer(std::size_t i);
  LayerParams<const T> layer(std::size_t i) const;

  void zero() { std::fill(values_.begin(), values_.end(), T(0)); }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  struct Slot {
    std::size_t weights_offset, weights_size, biases_offset, biases_size;
    friend bool operator==(const Slot&, const Slot&) = default;
  };
  std::vector<T> values_;
  std::vector<Slot> offsets_;
};

// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights with fan = channels * width,
// zero biases.
template <typename T>
ParamSet<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename U, typename T>
ParamSet<U> convert_params(const NetworkSpec& spec, const ParamSet<T>& src);

// activations[0] is the network input, activations[i + 1] the output of layer i.
template <typename T>
struct ForwardCache {
  std::vector<FeatureMap<T>> activations;
  const FeatureMap<T>& output() const { return activations.back(); }
};

template <typename T>
void forward(const NetworkSpec& spec, const ParamSet<T>& params, const FeatureMap<T>& input,
             ForwardCache<T>& cache);

// Inference-only pass that keeps two ping-pong buffers instead of every layer.
template <typename T>
FeatureMap<T> forward(const NetworkSpec& spec, const ParamSet<T>& params, const FeatureMap<T>& input);

// Accumulates parameter gradients into `grads` for a cache produced by forward().
template <typename T>
void backward(const NetworkSpec& spec, const ParamSet<T>& params, const ForwardCache<T>& cache,
              const FeatureMap<T>& grad_output, ParamSet<T>& grads);

}  // namespace nilm
