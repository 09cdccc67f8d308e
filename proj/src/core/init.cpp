#include "anonet/core/init.hpp"

#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

template <typename T>
Tensor<T> he_normal(const Shape4& shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw ConfigError("he_normal: fan_in must be positive");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <typename T>
Tensor<T> unit_normal(const Shape4& shape, Rng& rng) {
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
  return t;
}

template Tensor<float> he_normal<float>(const Shape4&, std::size_t, Rng&);
template Tensor<double> he_normal<double>(const Shape4&, std::size_t, Rng&);
template Tensor<float> unit_normal<float>(const Shape4&, Rng&);
template Tensor<double> unit_normal<double>(const Shape4&, Rng&);

}  // namespace anonet
