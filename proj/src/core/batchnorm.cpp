#include "anonet/core/batchnorm.hpp"

#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

struct ChannelStats {
  double mean = 0.0;
  double var = 0.0;
};

template <typename T>
ChannelStats channel_stats(const Tensor<T>& x, std::size_t c) {
  const auto& s = x.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  double sum = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* p = x.plane(n, c);
    for (std::size_t i = 0; i < plane; ++i) sum += static_cast<double>(p[i]);
  }
  const double mean = sum / count;
  double sq = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* p = x.plane(n, c);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = static_cast<double>(p[i]) - mean;
      sq += d * d;
    }
  }
  return {mean, sq / count};
}

template <typename T>
void check_channels(const Tensor<T>& x, const BatchNormParams<T>& p) {
  p.validate();
  if (x.shape().c != p.channels()) {
    throw ShapeError("batchnorm: input has " + std::to_string(x.shape().c) +
                     " channels, parameters have " + std::to_string(p.channels()));
  }
  if (x.shape().n * x.shape().plane() == 0) throw ShapeError("batchnorm: empty input");
}

}  // namespace

template <typename T>
BatchNormParams<T>::BatchNormParams(std::size_t channels)
    : gamma(channels, T(1)),
      beta(channels, T(0)),
      running_mean(channels, T(0)),
      running_var(channels, T(1)) {}

template <typename T>
void BatchNormParams<T>::validate() const {
  const std::size_t c = gamma.size();
  if (beta.size() != c || running_mean.size() != c || running_var.size() != c) {
    throw ShapeError("batchnorm parameter vectors disagree in length");
  }
  if (!(epsilon > 0.0)) throw ConfigError("batchnorm epsilon must be positive");
  if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batchnorm momentum must be in (0,1)");
  for (T v : running_var) {
    if (v < T(0)) throw NumericError("batchnorm running variance is negative");
  }
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNormParams<T>& p, NormMode mode,
                            bool update_running) {
  check_channels(x, p);
  if (mode == NormMode::inference && !p.running_initialized) {
    throw ConfigError("batchnorm: inference mode requested before running statistics exist");
  }
  const auto& s = x.shape();
  const std::size_t plane = s.plane();
  Tensor<T> y(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    ChannelStats st;
    if (mode == NormMode::training) {
      st = channel_stats(x, c);
      if (update_running) {
        if (!p.running_initialized) {
          p.running_mean[c] = static_cast<T>(st.mean);
          p.running_var[c] = static_cast<T>(st.var);
        } else {
          const double m = p.momentum;
          p.running_mean[c] =
              static_cast<T>(m * static_cast<double>(p.running_mean[c]) + (1.0 - m) * st.mean);
          p.running_var[c] =
              static_cast<T>(m * static_cast<double>(p.running_var[c]) + (1.0 - m) * st.var);
        }
      }
    } else {
      st = {static_cast<double>(p.running_mean[c]), static_cast<double>(p.running_var[c])};
    }
    const double inv_std = 1.0 / std::sqrt(st.var + p.epsilon);
    const double scale = static_cast<double>(p.gamma[c]) * inv_std;
    const double shift = static_cast<double>(p.beta[c]) - st.mean * scale;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] = static_cast<T>(static_cast<double>(src[i]) * scale + shift);
      }
    }
  }
  if (mode == NormMode::training && update_running) p.running_initialized = true;
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& x, const BatchNormParams<T>& p,
                                     const Tensor<T>& grad_out, NormMode mode) {
  check_channels(x, p);
  if (grad_out.shape() != x.shape()) throw ShapeError("batchnorm_backward: grad_out shape mismatch");
  if (mode == NormMode::inference && !p.running_initialized) {
    throw ConfigError("batchnorm: inference mode requested before running statistics exist");
  }
  const auto& s = x.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  BatchNormGrads<T> g;
  g.input = Tensor<T>(s);
  g.gamma.assign(s.c, T(0));
  g.beta.assign(s.c, T(0));
  for (std::size_t c = 0; c < s.c; ++c) {
    const ChannelStats st = mode == NormMode::training
                                ? channel_stats(x, c)
                                : ChannelStats{static_cast<double>(p.running_mean[c]),
                                               static_cast<double>(p.running_var[c])};
    const double inv_std = 1.0 / std::sqrt(st.var + p.epsilon);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* xs = x.plane(n, c);
      const T* dy = grad_out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double xhat = (static_cast<double>(xs[i]) - st.mean) * inv_std;
        sum_dy += static_cast<double>(dy[i]);
        sum_dy_xhat += static_cast<double>(dy[i]) * xhat;
      }
    }
    g.gamma[c] = static_cast<T>(sum_dy_xhat);
    g.beta[c] = static_cast<T>(sum_dy);
    const double gamma = static_cast<double>(p.gamma[c]);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* xs = x.plane(n, c);
      const T* dy = grad_out.plane(n, c);
      T* dx = g.input.plane(n, c);
      if (mode == NormMode::training) {
        // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
        const double mean_dy = sum_dy / count;
        const double mean_dy_xhat = sum_dy_xhat / count;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat = (static_cast<double>(xs[i]) - st.mean) * inv_std;
          dx[i] = static_cast<T>(gamma * inv_std *
                                 (static_cast<double>(dy[i]) - mean_dy - xhat * mean_dy_xhat));
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] = static_cast<T>(gamma * inv_std * static_cast<double>(dy[i]));
        }
      }
    }
  }
  return g;
}

#define ANONET_INSTANTIATE_BN(T)                                                             \
  template struct BatchNormParams<T>;                                                        \
  template Tensor<T> batchnorm_forward<T>(const Tensor<T>&, BatchNormParams<T>&, NormMode,   \
                                          bool);                                             \
  template BatchNormGrads<T> batchnorm_backward<T>(const Tensor<T>&, const BatchNormParams<T>&, \
                                                   const Tensor<T>&, NormMode);

ANONET_INSTANTIATE_BN(float)
ANONET_INSTANTIATE_BN(double)

}  // namespace anonet
