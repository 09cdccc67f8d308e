#pragma once

#include <string>

#include "anonet/core/tensor.hpp"

namespace anonet {

enum class Activation { relu, tanh, linear };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// `x` may be either the input or the output of relu; both share a sign pattern.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x);
/// Takes the forward output y = tanh(x): dx = (1 - y^2) dy.
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> activate(Activation a, const Tensor<T>& x);
/// `y` is activate(a, x).
template <typename T>
Tensor<T> activate_backward(Activation a, const Tensor<T>& y, const Tensor<T>& grad_out);

}  // namespace anonet
