#include "anonet/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const ScalarFn& f, std::span<const double> point,
                           std::span<const double> analytic, GradCheckOptions opts,
                           const SkipFn& skip) {
  if (point.size() != analytic.size()) throw ShapeError("grad_check: gradient length mismatch");
  std::vector<double> x(point.begin(), point.end());
  GradCheckResult r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + opts.epsilon;
    const double fp = f(x);
    x[i] = orig - opts.epsilon;
    const double fm = f(x);
    x[i] = orig;
    if (skip && skip(i)) {
      ++r.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * opts.epsilon);
    const double err = relative_error(analytic[i], numeric, opts.floor);
    ++r.checked;
    if (err > r.max_rel_error || !std::isfinite(err)) {
      r.max_rel_error = std::isfinite(err) ? err : HUGE_VAL;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace anonet
