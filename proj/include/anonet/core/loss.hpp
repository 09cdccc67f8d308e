#pragma once

#include <string>

#include "anonet/core/tensor.hpp"

namespace anonet {

enum class LossKind { mse, cross_entropy };

const char* to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  ///< d(value)/d(pred)
};

/// (1/n) sum (target - pred)^2.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Binary cross entropy on probabilities; pred is clamped to [eps, 1-eps]
/// and the gradient is taken at the clamped value. Targets must be 0 or 1.
template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& pred, const Tensor<T>& target,
                                 double eps = 1e-7);

}  // namespace anonet
