#include <cmath>

#include "nilm/tensor_nn.hpp"

namespace nilm {

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw Error(Errc::invalid_argument, "adam: parameter, gradient and moment sizes differ");
  }
  const AdamHyper& h = state.hyper;
  if (!(h.step_size > 0.0)) throw Error(Errc::invalid_argument, "adam: step_size must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(Errc::diverged, "non-finite gradient at parameter " + std::to_string(i));
    }
  }

  const std::uint64_t step = state.step_count + 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(h.beta1);
  const T b2 = static_cast<T>(h.beta2);
  const T lr = static_cast<T>(h.step_size);
  const T eps = static_cast<T>(h.epsilon);
  const T inv_c1 = static_cast<T>(1.0 / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);

  T* m = state.first_moment.data();
  T* v = state.second_moment.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const T m_hat = m[i] * inv_c1;
    const T v_hat = v[i] * inv_c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
  state.step_count = step;
}

template void adam_step(std::span<float>, std::span<const float>, AdamState<float>&);
template void adam_step(std::span<double>, std::span<const double>, AdamState<double>&);

}  // namespace nilm
