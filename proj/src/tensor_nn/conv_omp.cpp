// OpenMP convolution kernels.
//
// Work is split over output channels (forward, weight gradients) or input
// channels (input gradients), so each output element is always reduced in the
// same order by a single thread. Results are therefore bit-identical for any
// thread count.

#include <omp.h>

#include <array>
#include <cstring>

#include "nilm/tensor_nn.hpp"

namespace nilm {

namespace {

constexpr std::size_t kTapGroup = 8;
constexpr std::size_t kTile = 1024;
// Single-output layers at least this wide (the S2P dense stage) use dot
// products. Their summation order differs from the tiled path, so narrow layers
// stay on the tiled path to keep FCN outputs independent of input length.
constexpr std::size_t kDenseWidth = 64;

template <typename T>
void check_shapes(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec) {
  spec.validate();
  if (input.channels() != spec.in_channels) {
    throw Error(Errc::invalid_argument, "input has " + std::to_string(input.channels()) +
                                            " channels, layer expects " +
                                            std::to_string(spec.in_channels));
  }
  check_params<T>(spec, params);
}

// dst[t] += sum_j w[j] * src[j][t] for t in [0, n), for a group of up to
// kTapGroup source rows. Fusing taps keeps dst in registers across the group.
template <typename T>
inline void fused_axpy(T* __restrict dst, const T* const* src, const T* w, std::size_t taps,
                       std::size_t n) {
  switch (taps) {
    case 8: {
      const T w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4], w5 = w[5], w6 = w[6], w7 = w[7];
      const T *s0 = src[0], *s1 = src[1], *s2 = src[2], *s3 = src[3], *s4 = src[4], *s5 = src[5],
              *s6 = src[6], *s7 = src[7];
#pragma omp simd
      for (std::size_t t = 0; t < n; ++t) {
        dst[t] += w0 * s0[t] + w1 * s1[t] + w2 * s2[t] + w3 * s3[t] + w4 * s4[t] + w5 * s5[t] +
                  w6 * s6[t] + w7 * s7[t];
      }
      return;
    }
    case 4: {
      const T w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3];
      const T *s0 = src[0], *s1 = src[1], *s2 = src[2], *s3 = src[3];
#pragma omp simd
      for (std::size_t t = 0; t < n; ++t) dst[t] += w0 * s0[t] + w1 * s1[t] + w2 * s2[t] + w3 * s3[t];
      return;
    }
    default:
      for (std::size_t j = 0; j < taps; ++j) {
        const T wj = w[j];
        const T* sj = src[j];
#pragma omp simd
        for (std::size_t t = 0; t < n; ++t) dst[t] += wj * sj[t];
      }
  }
}

// Runs fused_axpy over an arbitrary list of (source, weight) pairs in groups.
template <typename T>
inline void accumulate_taps(T* dst, const T* const* src, const T* w, std::size_t taps, std::size_t n) {
  std::size_t j = 0;
  for (; j + kTapGroup <= taps; j += kTapGroup) fused_axpy(dst, src + j, w + j, kTapGroup, n);
  if (taps - j >= 4) {
    fused_axpy(dst, src + j, w + j, 4, n);
    j += 4;
  }
  if (j < taps) fused_axpy(dst, src + j, w + j, taps - j, n);
}

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < n; ++t) acc += a[t] * b[t];
  return acc;
}

template <typename T>
inline T sum(const T* a, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < n; ++t) acc += a[t];
  return acc;
}

}  // namespace

template <typename T>
void conv1d_forward_into(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                         const LayerSpec& spec, FeatureMap<T>& output) {
  check_shapes(input, params, spec);
  const std::size_t len = spec.output_length(input.length());
  output.resize(spec.out_channels, len);

  const std::size_t taps = spec.in_channels * spec.width;
  const auto out_channels = static_cast<std::ptrdiff_t>(spec.out_channels);

  if (len == 1 && spec.width >= kDenseWidth) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oi = 0; oi < out_channels; ++oi) {
      const auto o = static_cast<std::size_t>(oi);
      T acc = spec.has_bias ? params.biases[o] : T(0);
      for (std::size_t c = 0; c < spec.in_channels; ++c) {
        const T* w = params.weights.data() + spec.weight_index(o, c, 0);
        const T* x = input.row(c).data();
        if (spec.dilation == 1) {
          acc += dot(w, x, spec.width);
        } else {
          for (std::size_t k = 0; k < spec.width; ++k) acc += w[k] * x[k * spec.dilation];
        }
      }
      if (spec.activation == Activation::relu && !(acc > T(0))) acc = T(0);
      output(o, 0) = acc;
    }
    return;
  }

#pragma omp parallel
  {
    std::vector<const T*> src(taps);
#pragma omp for schedule(static)
    for (std::ptrdiff_t oi = 0; oi < out_channels; ++oi) {
      const auto o = static_cast<std::size_t>(oi);
      const T* w = params.weights.data() + spec.weight_index(o, 0, 0);
      T* row = output.row(o).data();
      const T bias = spec.has_bias ? params.biases[o] : T(0);
      for (std::size_t t0 = 0; t0 < len; t0 += kTile) {
        const std::size_t n = std::min(kTile, len - t0);
        for (std::size_t t = 0; t < n; ++t) row[t0 + t] = bias;
        for (std::size_t c = 0; c < spec.in_channels; ++c) {
          for (std::size_t k = 0; k < spec.width; ++k) {
            src[c * spec.width + k] = input.row(c).data() + t0 + k * spec.dilation;
          }
        }
        accumulate_taps(row + t0, src.data(), w, taps, n);
        if (spec.activation == Activation::relu) {
#pragma omp simd
          for (std::size_t t = 0; t < n; ++t) row[t0 + t] = row[t0 + t] > T(0) ? row[t0 + t] : T(0);
        }
      }
    }
  }
}

template <typename T>
FeatureMap<T> conv1d_forward(const FeatureMap<T>& input, std::type_identity_t<LayerParams<const T>> params,
                             const LayerSpec& spec) {
  FeatureMap<T> out;
  conv1d_forward_into(input, params, spec, out);
  return out;
}

template <typename T>
void conv1d_backward_accumulate(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                const FeatureMap<T>& cached_output, std::type_identity_t<LayerParams<const T>> params,
                                const LayerSpec& spec, LayerParams<T> grad_params,
                                FeatureMap<T>* grad_input) {
  check_shapes(cached_input, params, spec);
  check_params<T>(spec, LayerParams<const T>(grad_params));
  const std::size_t len = spec.output_length(cached_input.length());
  if (grad_output.channels() != spec.out_channels || grad_output.length() != len) {
    throw Error(Errc::invalid_argument, "grad_output shape does not match forward output");
  }
  if (spec.activation == Activation::relu &&
      (cached_output.channels() != spec.out_channels || cached_output.length() != len)) {
    throw Error(Errc::invalid_argument, "cached_output shape does not match forward output");
  }

  // Gradient with respect to the pre-activation.
  const FeatureMap<T>* gpre = &grad_output;
  FeatureMap<T> masked;
  if (spec.activation == Activation::relu) {
    masked.resize(spec.out_channels, len);
    const T* g = grad_output.values().data();
    const T* y = cached_output.values().data();
    T* m = masked.values().data();
    const std::size_t total = masked.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < total; ++i) m[i] = y[i] > T(0) ? g[i] : T(0);
    gpre = &masked;
  }

  const auto out_channels = static_cast<std::ptrdiff_t>(spec.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oi = 0; oi < out_channels; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    const T* g = gpre->row(o).data();
    if (spec.has_bias) grad_params.biases[o] += sum(g, len);
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
      const T* x = cached_input.row(c).data();
      for (std::size_t k = 0; k < spec.width; ++k) {
        grad_params.weights[spec.weight_index(o, c, k)] += dot(g, x + k * spec.dilation, len);
      }
    }
  }

  if (grad_input == nullptr) return;
  grad_input->resize(spec.in_channels, cached_input.length());

  const auto in_channels = static_cast<std::ptrdiff_t>(spec.in_channels);
#pragma omp parallel
  {
    std::vector<const T*> src(spec.out_channels);
    std::vector<T> w(spec.out_channels);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < in_channels; ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      T* dst = grad_input->row(c).data();
      std::memset(dst, 0, sizeof(T) * cached_input.length());
      for (std::size_t o = 0; o < spec.out_channels; ++o) src[o] = gpre->row(o).data();
      for (std::size_t k = 0; k < spec.width; ++k) {
        for (std::size_t o = 0; o < spec.out_channels; ++o) w[o] = params.weights[spec.weight_index(o, c, k)];
        accumulate_taps(dst + k * spec.dilation, src.data(), w.data(), spec.out_channels, len);
      }
    }
  }
}

template <typename T>
ConvGradients<T> conv1d_backward(const FeatureMap<T>& grad_output, const FeatureMap<T>& cached_input,
                                 std::type_identity_t<LayerParams<const T>> params, const LayerSpec& spec) {
  ConvGradients<T> g{FeatureMap<T>(), std::vector<T>(spec.weight_count(), T(0)),
                     std::vector<T>(spec.has_bias ? spec.out_channels : 0, T(0))};
  FeatureMap<T> output;
  if (spec.activation == Activation::relu) conv1d_forward_into(cached_input, params, spec, output);
  conv1d_backward_accumulate(grad_output, cached_input, output, params, spec,
                             LayerParams<T>{g.grad_weights, g.grad_biases}, &g.grad_input);
  return g;
}

template void conv1d_forward_into(const FeatureMap<float>&, LayerParams<const float>, const LayerSpec&,
                                  FeatureMap<float>&);
template void conv1d_forward_into(const FeatureMap<double>&, LayerParams<const double>,
                                  const LayerSpec&, FeatureMap<double>&);
template FeatureMap<float> conv1d_forward(const FeatureMap<float>&, LayerParams<const float>,
                                          const LayerSpec&);
template FeatureMap<double> conv1d_forward(const FeatureMap<double>&, LayerParams<const double>,
                                           const LayerSpec&);
template void conv1d_backward_accumulate(const FeatureMap<float>&, const FeatureMap<float>&,
                                         const FeatureMap<float>&, LayerParams<const float>,
                                         const LayerSpec&, LayerParams<float>, FeatureMap<float>*);
template void conv1d_backward_accumulate(const FeatureMap<double>&, const FeatureMap<double>&,
                                         const FeatureMap<double>&, LayerParams<const double>,
                                         const LayerSpec&, LayerParams<double>, FeatureMap<double>*);
template ConvGradients<float> conv1d_backward(const FeatureMap<float>&, const FeatureMap<float>&,
                                              LayerParams<const float>, const LayerSpec&);
template ConvGradients<double> conv1d_backward(const FeatureMap<double>&, const FeatureMap<double>&,
                                               LayerParams<const double>, const LayerSpec&);

}  // namespace nilm
