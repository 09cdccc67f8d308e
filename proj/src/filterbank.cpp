#include "anonet/filterbank.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

constexpr int kOrientations = 6;
constexpr double kElongation = 3.0;

// (sigma, tau) of the 13 Schmid filters.
constexpr std::pair<double, double> kSchmidPairs[] = {
    {2, 1}, {4, 1}, {4, 2}, {6, 1}, {6, 2}, {6, 3}, {8, 1},
    {8, 2}, {8, 3}, {10, 1}, {10, 2}, {10, 3}, {10, 4}};

void check_kernel_size(std::size_t k) {
  if (k % 2 == 0) throw ConfigError("filter bank kernel size must be odd, got " + std::to_string(k));
  if (k < 5) throw ConfigError("filter bank kernel size must be >= 5, got " + std::to_string(k));
}

// Grid coordinates of row-major cell i: x grows to the right, y grows upward.
struct GridPoint {
  double x, y;
};
GridPoint grid_point(std::size_t k, std::size_t i) {
  const auto half = static_cast<double>((k - 1) / 2);
  const auto row = static_cast<double>(i / k);
  const auto col = static_cast<double>(i % k);
  return {col - half, half - row};
}

double gauss1d(double sigma, double x, int order) {
  const double variance = sigma * sigma;
  const double denom = 2.0 * variance;
  double g = std::exp(-x * x / denom) / std::sqrt(std::numbers::pi * denom);
  if (order == 1) g = -g * (x / variance);
  if (order == 2) g = g * ((x * x - variance) / (variance * variance));
  return g;
}

std::vector<double> gaussian_kernel(std::size_t k, double sigma) {
  std::vector<double> h(k * k);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto p = grid_point(k, i);
    h[i] = std::exp(-(p.x * p.x + p.y * p.y) / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v /= sum;
  return h;
}

// Laplacian of Gaussian, shifted to sum to zero on the grid.
std::vector<double> log_kernel(std::size_t k, double sigma) {
  const double var = sigma * sigma;
  auto h = gaussian_kernel(k, sigma);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto p = grid_point(k, i);
    h[i] *= (p.x * p.x + p.y * p.y - 2.0 * var) / (var * var);
  }
  const double mean = std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
  for (auto& v : h) v -= mean;
  return h;
}

std::vector<double> schmid_kernel(std::size_t k, double sigma, double tau) {
  std::vector<double> f(k * k);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto p = grid_point(k, i);
    const double r = std::sqrt(p.x * p.x + p.y * p.y);
    f[i] = std::cos(r * (std::numbers::pi * tau / sigma)) * std::exp(-(r * r) / (2 * sigma * sigma));
  }
  // F0: the constant that removes the DC component
  const double f0 = -std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  for (auto& v : f) v += f0;
  return f;
}

void push(FilterBank& bank, std::vector<double> kernel, FilterInfo info) {
  if (bank.normalized) kernel = normalize_filter(kernel, info.kind);
  bank.kernels.push_back(std::move(kernel));
  bank.info.push_back(info);
}

// 3 scales x 6 orientations of edges, then the same for bars.
void push_oriented(FilterBank& bank, std::span<const double> scales) {
  for (int order = 1; order <= 2; ++order) {
    for (double sigma : scales) {
      for (int o = 0; o < kOrientations; ++o) {
        const double angle = std::numbers::pi * o / kOrientations;
        push(bank, oriented_derivative(bank.kernel_size, sigma, kElongation, order, angle),
             {order == 1 ? FilterKind::edge : FilterKind::bar, sigma, kElongation, angle, 0.0});
      }
    }
  }
}

}  // namespace

const char* to_string(FilterFamily f) {
  switch (f) {
    case FilterFamily::LM: return "LM";
    case FilterFamily::S: return "S";
    case FilterFamily::RFS: return "RFS";
  }
  return "?";
}

const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::edge: return "edge";
    case FilterKind::bar: return "bar";
    case FilterKind::log: return "log";
    case FilterKind::gaussian: return "gaussian";
    case FilterKind::schmid: return "schmid";
  }
  return "?";
}

FilterFamily family_from_string(const std::string& s) {
  if (s == "LM" || s == "lm") return FilterFamily::LM;
  if (s == "S" || s == "s" || s == "schmid") return FilterFamily::S;
  if (s == "RFS" || s == "rfs") return FilterFamily::RFS;
  throw ConfigError("unknown filter bank family '" + s + "' (expected LM, S or RFS)");
}

double FilterBank::at(std::size_t filter, int dy, int dx) const {
  const int half = static_cast<int>((kernel_size - 1) / 2);
  const auto row = static_cast<std::size_t>(half - dy);
  const auto col = static_cast<std::size_t>(half + dx);
  return kernels.at(filter).at(row * kernel_size + col);
}

template <typename T>
Tensor<T> FilterBank::to_weights() const {
  Tensor<T> w({size(), 1, kernel_size, kernel_size});
  for (std::size_t f = 0; f < size(); ++f) {
    for (std::size_t i = 0; i < kernel_size * kernel_size; ++i) {
      w[f * kernel_size * kernel_size + i] = static_cast<T>(kernels[f][i]);
    }
  }
  return w;
}
template Tensor<float> FilterBank::to_weights<float>() const;
template Tensor<double> FilterBank::to_weights<double>() const;

std::vector<double> normalize_filter(std::span<const double> kernel, FilterKind kind) {
  std::vector<double> f(kernel.begin(), kernel.end());
  if (f.empty()) throw ConfigError("normalize_filter: empty kernel");
  if (kind != FilterKind::gaussian) {
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
    for (auto& v : f) v -= mean;
  }
  double l1 = 0.0;
  for (double v : f) l1 += std::abs(v);
  if (l1 == 0.0) throw ConfigError("normalize_filter: kernel is identically zero");
  for (auto& v : f) v /= l1;
  return f;
}

std::vector<double> oriented_derivative(std::size_t k, double sigma, double elongation, int order,
                                        double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  std::vector<double> f(k * k);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto p = grid_point(k, i);
    const double along = c * p.x - s * p.y;
    const double across = s * p.x + c * p.y;
    f[i] = gauss1d(elongation * sigma, along, 0) * gauss1d(sigma, across, order);
  }
  return f;
}

std::size_t bank_size(FilterFamily family) {
  switch (family) {
    case FilterFamily::LM: return 48;
    case FilterFamily::S: return 13;
    case FilterFamily::RFS: return 38;
  }
  return 0;
}

FilterBank build_lm(std::size_t k, bool normalize) {
  check_kernel_size(k);
  FilterBank bank{FilterFamily::LM, k, normalize, {}, {}};
  const double r2 = std::numbers::sqrt2;
  const double derivative_scales[] = {1.0, r2, 2.0};
  push_oriented(bank, derivative_scales);
  for (double sigma : {1.0, r2, 2.0, 2.0 * r2}) {
    push(bank, gaussian_kernel(k, sigma), {FilterKind::gaussian, sigma, 1.0, 0.0, 0.0});
    push(bank, log_kernel(k, sigma), {FilterKind::log, sigma, 1.0, 0.0, 0.0});
    push(bank, log_kernel(k, 3.0 * sigma), {FilterKind::log, 3.0 * sigma, 1.0, 0.0, 0.0});
  }
  return bank;
}

FilterBank build_schmid(std::size_t k, bool normalize) {
  check_kernel_size(k);
  FilterBank bank{FilterFamily::S, k, normalize, {}, {}};
  for (auto [sigma, tau] : kSchmidPairs) {
    push(bank, schmid_kernel(k, sigma, tau), {FilterKind::schmid, sigma, 1.0, 0.0, tau});
  }
  return bank;
}

FilterBank build_rfs(std::size_t k, bool normalize) {
  check_kernel_size(k);
  FilterBank bank{FilterFamily::RFS, k, normalize, {}, {}};
  const double derivative_scales[] = {1.0, 2.0, 4.0};
  push_oriented(bank, derivative_scales);
  push(bank, gaussian_kernel(k, 10.0), {FilterKind::gaussian, 10.0, 1.0, 0.0, 0.0});
  push(bank, log_kernel(k, 10.0), {FilterKind::log, 10.0, 1.0, 0.0, 0.0});
  return bank;
}

FilterBank build_bank(FilterFamily family, std::size_t k, bool normalize) {
  switch (family) {
    case FilterFamily::LM: return build_lm(k, normalize);
    case FilterFamily::S: return build_schmid(k, normalize);
    case FilterFamily::RFS: return build_rfs(k, normalize);
  }
  throw ConfigError("unknown filter bank family");
}

}  // namespace anonet
