#pragma once

#include <cstddef>

#include "anonet/core/rng.hpp"
#include "anonet/core/tensor.hpp"

namespace anonet {

/// Zero-mean normal with variance 2 / fan_in.
template <typename T>
Tensor<T> he_normal(const Shape4& shape, std::size_t fan_in, Rng& rng);

/// Zero-mean, unit-variance normal.
template <typename T>
Tensor<T> unit_normal(const Shape4& shape, Rng& rng);

}  // namespace anonet
