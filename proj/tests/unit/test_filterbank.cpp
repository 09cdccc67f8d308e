#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"
#include "anonet/filterbank.hpp"

using namespace anonet;

namespace {

double sum(const std::vector<double>& k) {
  double s = 0;
  for (double v : k) s += v;
  return s;
}

double l1(const std::vector<double>& k) {
  double s = 0;
  for (double v : k) s += std::abs(v);
  return s;
}

std::size_t count_kind(const FilterBank& b, FilterKind kind) {
  std::size_t n = 0;
  for (const auto& f : b.info) n += f.kind == kind;
  return n;
}

// Rotates a k x k row-major kernel by 90 degrees.
std::vector<double> rot90(const std::vector<double>& v, std::size_t k) {
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) out[c * k + (k - 1 - r)] = v[r * k + c];
  return out;
}

}  // namespace

TEST_CASE("bank sizes and composition") {
  for (std::size_t k : {5u, 7u, 11u, 13u}) {
    const auto lm = build_lm(k), s = build_schmid(k), rfs = build_rfs(k);
    CHECK(lm.size() == 48);
    CHECK(s.size() == 13);
    CHECK(rfs.size() == 38);
    CHECK(count_kind(lm, FilterKind::edge) == 18);
    CHECK(count_kind(lm, FilterKind::bar) == 18);
    CHECK(count_kind(lm, FilterKind::log) == 8);
    CHECK(count_kind(lm, FilterKind::gaussian) == 4);
    CHECK(count_kind(rfs, FilterKind::edge) == 18);
    CHECK(count_kind(rfs, FilterKind::bar) == 18);
    CHECK(count_kind(rfs, FilterKind::log) == 1);
    CHECK(count_kind(rfs, FilterKind::gaussian) == 1);
    CHECK(bank_size(FilterFamily::LM) == 48);
  }
}

TEST_CASE("even or tiny kernels are rejected") {
  CHECK_THROWS_AS(build_lm(8), ConfigError);
  CHECK_THROWS_AS(build_schmid(6), ConfigError);
  CHECK_THROWS_AS(build_rfs(10), ConfigError);
  CHECK_THROWS_AS(build_lm(3), ConfigError);
  CHECK_THROWS_AS(family_from_string("gabor"), ConfigError);
}

TEST_CASE("LM construction parameters") {
  const auto lm = build_lm(11);
  const double s2 = std::sqrt(2.0);
  std::map<double, int> edge_scales;
  for (const auto& f : lm.info) {
    if (f.kind == FilterKind::edge || f.kind == FilterKind::bar) {
      CHECK(f.elongation == 3.0);
      edge_scales[f.sigma]++;
      const double o = f.orientation / (std::numbers::pi / 6);
      CHECK(std::abs(o - std::round(o)) < 1e-12);
    }
  }
  CHECK(edge_scales.size() == 3);
  CHECK(edge_scales.count(1.0));
  CHECK(edge_scales.begin()->first == 1.0);
  CHECK(std::abs(std::next(edge_scales.begin())->first - s2) < 1e-12);
  CHECK(edge_scales.rbegin()->first == doctest::Approx(2.0));
}

TEST_CASE("odd symmetry of first-derivative filters") {
  for (double sigma : {1.0, std::sqrt(2.0), 2.0}) {
    for (int o = 0; o < 6; ++o) {
      const double a = std::numbers::pi * o / 6;
      const auto f = oriented_derivative(11, sigma, 3.0, 1, a);
      const auto g = oriented_derivative(11, sigma, 3.0, 1, a + std::numbers::pi);
      for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == doctest::Approx(-f[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero DC and unit L1 after normalization") {
  for (std::size_t k : {7u, 11u}) {
    for (auto fam : {FilterFamily::LM, FilterFamily::S, FilterFamily::RFS}) {
      const auto b = build_bank(fam, k);
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (b.info[i].kind != FilterKind::gaussian) CHECK(std::abs(sum(b.kernels[i])) < 1e-6);
        CHECK(l1(b.kernels[i]) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("Schmid DC component vanishes on the grid") {
  for (std::size_t k : {5u, 7u, 11u, 15u}) {
    for (bool norm : {false, true}) {
      const auto s = build_schmid(k, norm);
      for (const auto& f : s.kernels) CHECK(std::abs(sum(f)) < 1e-9);
    }
  }
}

TEST_CASE("Schmid filters use the standard (sigma, tau) pairs") {
  const double pairs[13][2] = {{2, 1}, {4, 1}, {4, 2}, {6, 1}, {6, 2}, {6, 3}, {8, 1},
                               {8, 2}, {8, 3}, {10, 1}, {10, 2}, {10, 3}, {10, 4}};
  const auto s = build_schmid(7);
  for (int i = 0; i < 13; ++i) {
    CHECK(s.info[i].kind == FilterKind::schmid);
    CHECK(s.info[i].sigma == pairs[i][0]);
    CHECK(s.info[i].tau == pairs[i][1]);
  }
}

TEST_CASE("Schmid filters are radial") {
  const auto s = build_schmid(11);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.at(i, 3, 4) == doctest::Approx(s.at(i, 4, 3)).epsilon(1e-12));
    CHECK(s.at(i, 3, 4) == doctest::Approx(s.at(i, -3, -4)).epsilon(1e-12));
    CHECK(s.at(i, 0, 5) == doctest::Approx(s.at(i, 3, 4)).epsilon(1e-12));
  }
}

TEST_CASE("raw Schmid kernel follows the closed form") {
  const auto s = build_schmid(7, false);
  // F(r) = F0 + cos(pi tau r / sigma) exp(-r^2 / (2 sigma^2)), F0 = -mean.
  const double sigma = 4, tau = 2;
  double mean = 0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) {
      const double r = std::hypot(x, y);
      mean += std::cos(std::numbers::pi * tau * r / sigma) * std::exp(-r * r / (2 * sigma * sigma));
    }
  mean /= 49;
  const double r = std::hypot(1.0, 2.0);
  const double expect = std::cos(std::numbers::pi * tau * r / sigma) * std::exp(-r * r / (2 * sigma * sigma)) - mean;
  CHECK(s.at(2, 1, 2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("RFS isotropic filters are invariant under quarter turns") {
  for (std::size_t k : {7u, 11u}) {
    const auto b = build_rfs(k);
    for (std::size_t i = 36; i < 38; ++i) {
      const auto r = rot90(b.kernels[i], k);
      for (std::size_t j = 0; j < r.size(); ++j) CHECK(r[j] == doctest::Approx(b.kernels[i][j]).epsilon(1e-12));
      CHECK(b.info[i].sigma == 10.0);
    }
  }
  const auto raw = build_rfs(11, false);
  for (std::size_t i = 0; i < 36; ++i)
    if (raw.info[i].kind == FilterKind::edge) CHECK(std::abs(sum(raw.kernels[i])) < 1e-9);
  CHECK(sum(raw.kernels[36 + (raw.info[36].kind == FilterKind::gaussian ? 0 : 1)]) > 0.0);
}

TEST_CASE("normalize_filter") {
  const std::vector<double> twos(49, 2.0);
  const auto g = normalize_filter(twos, FilterKind::gaussian);
  for (double v : g) CHECK(v == doctest::Approx(2.0 / 98.0));
  CHECK(l1(g) == doctest::Approx(1.0));
  Rng rng(1);
  std::vector<double> v(25);
  for (auto& x : v) x = rng.uniform(-1, 1);
  const auto n = normalize_filter(v, FilterKind::edge);
  CHECK(std::abs(sum(n)) < 1e-12);
  const auto n2 = normalize_filter(n, FilterKind::edge);
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(n2[i] == doctest::Approx(n[i]).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_filter(std::vector<double>(9, 0.0), FilterKind::edge), ConfigError);
}

TEST_CASE("metadata does not depend on kernel size and builds are deterministic") {
  for (auto fam : {FilterFamily::LM, FilterFamily::S, FilterFamily::RFS}) {
    const auto a = build_bank(fam, 7), b = build_bank(fam, 11), c = build_bank(fam, 7);
    CHECK(a.info == b.info);
    CHECK(a.kernels == c.kernels);
  }
}

TEST_CASE("bank as convolution weights") {
  const auto b = build_lm(7);
  const auto w = b.to_weights<float>();
  CHECK(w.shape() == Shape4{48, 1, 7, 7});
  CHECK(w.at(5, 0, 2, 3) == static_cast<float>(b.kernels[5][2 * 7 + 3]));
}
