#include "anonet/core/loss.hpp"

#include <algorithm>
#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

const char* to_string(LossKind k) { return k == LossKind::mse ? "mse" : "cross_entropy"; }

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "cross_entropy" || s == "crossentropy" || s == "ce") return LossKind::cross_entropy;
  throw ConfigError("unknown loss '" + s + "' (expected mse or cross_entropy)");
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: pred " + pred.shape().str() + " vs target " + target.shape().str());
  }
  const double n = static_cast<double>(pred.size());
  LossResult<T> r;
  r.grad = Tensor<T>(pred.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / n);
  }
  r.value = sum / n;
  return r;
}

template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("cross_entropy_loss: pred " + pred.shape().str() + " vs target " +
                     target.shape().str());
  }
  const double n = static_cast<double>(pred.size());
  LossResult<T> r;
  r.grad = Tensor<T>(pred.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double y = static_cast<double>(target[i]);
    if (y != 0.0 && y != 1.0) throw ConfigError("cross_entropy_loss: targets must be 0 or 1");
    const double p = std::clamp(static_cast<double>(pred[i]), eps, 1.0 - eps);
    sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    r.grad[i] = static_cast<T>((p - y) / (p * (1.0 - p)) / n);
  }
  r.value = sum / n;
  return r;
}

template LossResult<float> mse_loss<float>(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss<double>(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> cross_entropy_loss<float>(const Tensor<float>&, const Tensor<float>&,
                                                     double);
template LossResult<double> cross_entropy_loss<double>(const Tensor<double>&,
                                                       const Tensor<double>&, double);

}  // namespace anonet
