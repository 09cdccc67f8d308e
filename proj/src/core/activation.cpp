#include "anonet/core/activation.hpp"

#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + s + "'");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (x.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
  if (y.shape() != grad_out.shape()) throw ShapeError("tanh_backward: shape mismatch");
  Tensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = (T(1) - y[i] * y[i]) * grad_out[i];
  return g;
}

template <typename T>
Tensor<T> activate(Activation a, const Tensor<T>& x) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh_act(x);
    case Activation::linear: return x;
  }
  return x;
}

template <typename T>
Tensor<T> activate_backward(Activation a, const Tensor<T>& y, const Tensor<T>& grad_out) {
  switch (a) {
    case Activation::relu: return relu_backward(y, grad_out);
    case Activation::tanh: return tanh_backward(y, grad_out);
    case Activation::linear: return grad_out;
  }
  return grad_out;
}

#define ANONET_INSTANTIATE_ACT(T)                                                    \
  template Tensor<T> relu<T>(const Tensor<T>&);                                      \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> tanh_act<T>(const Tensor<T>&);                                  \
  template Tensor<T> tanh_backward<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> activate<T>(Activation, const Tensor<T>&);                      \
  template Tensor<T> activate_backward<T>(Activation, const Tensor<T>&, const Tensor<T>&);

ANONET_INSTANTIATE_ACT(float)
ANONET_INSTANTIATE_ACT(double)

}  // namespace anonet
