#pragma once

#include <cstddef>
#include <vector>

#include "anonet/core/tensor.hpp"

namespace anonet {

enum class NormMode { training, inference };

/// Per-channel batch normalization state.
///
/// Training mode normalizes with the batch's population statistics over
/// (N, H, W) and folds them into the running estimates:
///   running = momentum * running + (1 - momentum) * batch
/// The first training call seeds the running estimates with the batch
/// statistics directly. Inference mode uses the running estimates and
/// refuses to run before they exist.
template <typename T>
struct BatchNormParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double epsilon = 1e-8;
  double momentum = 0.99;
  bool running_initialized = false;

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t channels);

  [[nodiscard]] std::size_t channels() const { return gamma.size(); }
  void validate() const;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

/// `update_running` is ignored in inference mode.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNormParams<T>& p, NormMode mode,
                            bool update_running = true);

/// Gradient of batchnorm_forward; training-mode statistics are recomputed
/// from `x`, so the call is pure.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& x, const BatchNormParams<T>& p,
                                     const Tensor<T>& grad_out, NormMode mode);

}  // namespace anonet
