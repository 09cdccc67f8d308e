#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "anonet/core/tensor.hpp"

namespace anonet {

enum class FilterFamily { LM, S, RFS };
enum class FilterKind { edge, bar, log, gaussian, schmid };

const char* to_string(FilterFamily f);
const char* to_string(FilterKind k);
FilterFamily family_from_string(const std::string& s);

/// Construction parameters of one filter. Oriented filters are elongated
/// Gaussians: `sigma` along the derivative axis and `elongation * sigma`
/// along the filter's length. Isotropic filters have elongation 1.
struct FilterInfo {
  FilterKind kind = FilterKind::gaussian;
  double sigma = 0.0;
  double elongation = 1.0;
  double orientation = 0.0;  ///< radians
  double tau = 0.0;          ///< Schmid frequency; 0 otherwise

  friend bool operator==(const FilterInfo&, const FilterInfo&) = default;
};

/// Stack of k x k kernels sampled on the centered grid {-(k-1)/2 .. (k-1)/2}^2.
/// Kernels are row-major; row 0 is the top (y = +(k-1)/2), column 0 is the
/// left (x = -(k-1)/2).
struct FilterBank {
  FilterFamily family = FilterFamily::S;
  std::size_t kernel_size = 0;
  bool normalized = true;
  std::vector<std::vector<double>> kernels;
  std::vector<FilterInfo> info;

  [[nodiscard]] std::size_t size() const { return kernels.size(); }
  /// Value at grid offset (dy, dx) from the center, with dy pointing up.
  [[nodiscard]] double at(std::size_t filter, int dy, int dx) const;
  /// Kernels as conv weights of shape (n, 1, k, k).
  template <typename T>
  [[nodiscard]] Tensor<T> to_weights() const;
};

/// Leung-Malik: 18 edge + 18 bar (3 scales x 6 orientations), 4 Gaussians, 8 LoG.
FilterBank build_lm(std::size_t k, bool normalize = true);
/// Schmid: 13 isotropic cos(pi tau r / sigma) exp(-r^2 / 2 sigma^2) filters
/// with the per-filter constant chosen so each sums to zero on the grid.
FilterBank build_schmid(std::size_t k, bool normalize = true);
/// Root filter set: 18 edge + 18 bar (3 scales x 6 orientations), Gaussian, LoG.
FilterBank build_rfs(std::size_t k, bool normalize = true);
FilterBank build_bank(FilterFamily family, std::size_t k, bool normalize = true);

/// Number of filters a family always produces (48 / 13 / 38).
std::size_t bank_size(FilterFamily family);

/// Mean subtraction for zero-DC kinds (everything but Gaussians), then unit L1.
std::vector<double> normalize_filter(std::span<const double> kernel, FilterKind kind);

/// Unnormalized elongated Gaussian derivative of order 1 (edge) or 2 (bar)
/// across the axis at `angle`.
std::vector<double> oriented_derivative(std::size_t k, double sigma, double elongation, int order,
                                        double angle);

}  // namespace anonet
