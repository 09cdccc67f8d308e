#pragma once

#include <cstddef>
#include <vector>

#include "anonet/core/tensor.hpp"

namespace anonet {

/// Weights (out, in, k, k) and bias of a same-padded 2-D convolution.
/// Padding is always (k-1)/2, so stride 1 preserves spatial extents.
template <typename T>
struct ConvParams {
  Tensor<T> weight;
  std::vector<T> bias;
  std::size_t stride = 1;
  bool trainable = true;

  ConvParams() = default;
  ConvParams(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
             std::size_t stride = 1, bool trainable = true);

  [[nodiscard]] std::size_t out_channels() const { return weight.shape().n; }
  [[nodiscard]] std::size_t in_channels() const { return weight.shape().c; }
  [[nodiscard]] std::size_t kernel() const { return weight.shape().h; }
  [[nodiscard]] std::size_t pad() const { return (kernel() - 1) / 2; }

  /// Throws ConfigError on even/non-square kernels, zero stride or bias mismatch.
  void validate() const;
};

enum class ConvPath {
  direct,        ///< nested loops; the reference definition
  patch_matrix,  ///< im2col tiles + GEMM
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;  ///< empty when not requested
  Tensor<T> weight;
  std::vector<T> bias;
};

struct ConvGradRequest {
  bool input = true;
  bool params = true;
};

/// Output extents: (N, out, ceil(H/s), ceil(W/s)).
template <typename T>
Shape4 conv2d_output_shape(const Shape4& input, const ConvParams<T>& p);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& p,
                         ConvPath path = ConvPath::patch_matrix);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, ConvGradRequest want = {},
                             ConvPath path = ConvPath::patch_matrix);

}  // namespace anonet
