#include "anonet/core/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape4 shape, T fill) : shape_(shape), values_(shape.size(), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape4 shape, std::vector<T> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw ShapeError("tensor " + shape_.str() + " needs " + std::to_string(shape_.size()) +
                     " values, got " + std::to_string(values_.size()));
  }
}

template <typename T>
void Tensor<T>::ensure_grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), T(0));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(values_.begin(), values_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> Tensor<T>::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) throw ShapeError("batch slice out of range");
  Shape4 s = shape_;
  s.n = count;
  const std::size_t per = shape_.c * shape_.h * shape_.w;
  std::vector<T> out(values_.begin() + static_cast<std::ptrdiff_t>(first * per),
                     values_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor<T>(s, std::move(out));
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace anonet
