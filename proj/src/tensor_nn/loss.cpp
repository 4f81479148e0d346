#include "nilm/tensor_nn.hpp"

namespace nilm {

template <typename T>
LossResult<T> mse_loss(const FeatureMap<T>& pred, const FeatureMap<T>& target,
                       std::span<const std::uint8_t> mask, std::size_t normalizer) {
  if (pred.channels() != target.channels() || pred.length() != target.length()) {
    throw Error(Errc::invalid_argument, "prediction and target shapes differ");
  }
  if (!mask.empty() && mask.size() != pred.size()) {
    throw Error(Errc::invalid_argument, "mask size does not match prediction");
  }
  const auto p = pred.values();
  const auto y = target.values();

  std::size_t count = 0;
  if (mask.empty()) {
    count = p.size();
  } else {
    for (auto m : mask) count += m != 0;
  }
  if (count == 0) throw Error(Errc::no_valid_targets, "no positions contribute to the loss");
  const double n = static_cast<double>(normalizer == 0 ? count : normalizer);

  LossResult<T> r{0.0, FeatureMap<T>(pred.channels(), pred.length()), count};
  auto g = r.grad.values();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    const double d = static_cast<double>(p[i]) - static_cast<double>(y[i]);
    total += d * d;
    g[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss = total / n;
  return r;
}

template LossResult<float> mse_loss(const FeatureMap<float>&, const FeatureMap<float>&,
                                    std::span<const std::uint8_t>, std::size_t);
template LossResult<double> mse_loss(const FeatureMap<double>&, const FeatureMap<double>&,
                                     std::span<const std::uint8_t>, std::size_t);

}  // namespace nilm
