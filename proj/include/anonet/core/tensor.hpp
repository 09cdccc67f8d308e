#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace anonet {

/// Extents of a (batch, channel, height, width) tensor.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  [[nodiscard]] std::size_t size() const { return n * c * h * w; }
  [[nodiscard]] std::size_t plane() const { return h * w; }
  [[nodiscard]] std::string str() const;
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense NCHW array with an optional same-shape gradient buffer.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T(0));
  Tensor(Shape4 shape, std::vector<T> values);

  [[nodiscard]] const Shape4& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return values_[offset(n, c, y, x)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return values_[offset(n, c, y, x)];
  }

  /// Pointer to the H*W plane of sample n, channel c.
  T* plane(std::size_t n, std::size_t c) { return values_.data() + offset(n, c, 0, 0); }
  const T* plane(std::size_t n, std::size_t c) const {
    return values_.data() + offset(n, c, 0, 0);
  }

  [[nodiscard]] bool has_grad() const { return !grad_.empty(); }
  /// Allocates the gradient slot (zeroed) when absent.
  void ensure_grad();
  void zero_grad();
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  void fill(T v);
  [[nodiscard]] bool all_finite() const;

  /// Copy of samples [first, first+count) along the batch axis.
  [[nodiscard]] Tensor slice_batch(std::size_t first, std::size_t count) const;

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape4 shape_{};
  std::vector<T> values_;
  std::vector<T> grad_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace anonet
