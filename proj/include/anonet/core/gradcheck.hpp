#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace anonet {

struct GradCheckOptions {
  double epsilon = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central-difference check of `analytic` = grad f at `point`.
///
/// `skip(i)` is called right after both probes of coordinate i, so it can
/// inspect state recorded by `f` during them and exclude the coordinate
/// (e.g. when the probe straddled a ReLU kink).
using ScalarFn = std::function<double(std::span<const double>)>;
using SkipFn = std::function<bool(std::size_t)>;

GradCheckResult grad_check(const ScalarFn& f, std::span<const double> point,
                           std::span<const double> analytic, GradCheckOptions opts = {},
                           const SkipFn& skip = {});

double relative_error(double analytic, double numeric, double floor = 1e-6);

}  // namespace anonet
