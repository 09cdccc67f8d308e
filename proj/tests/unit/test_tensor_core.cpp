#include <doctest.h>

#include <cmath>

#include "anonet/core/adadelta.hpp"
#include "anonet/core/activation.hpp"
#include "anonet/core/batchnorm.hpp"
#include "anonet/core/conv.hpp"
#include "anonet/core/errors.hpp"
#include "anonet/core/gradcheck.hpp"
#include "anonet/core/init.hpp"
#include "anonet/core/loss.hpp"
#include "anonet/core/rng.hpp"
#include "oracles.hpp"

using namespace anonet;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

std::vector<double> as_vec(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("tensor basics") {
  Tensor<float> t({2, 3, 4, 5}, 1.5f);
  CHECK(t.size() == 120);
  CHECK(t.at(1, 2, 3, 4) == 1.5f);
  CHECK_FALSE(t.has_grad());
  t.ensure_grad();
  CHECK(t.grad().size() == t.size());
  CHECK(t.all_finite());
  t[7] = std::nanf("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(Tensor<float>({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  const auto s = Tensor<float>({3, 1, 2, 2}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}).slice_batch(1, 2);
  CHECK(s.shape() == Shape4{2, 1, 2, 2});
  CHECK(s[0] == 4.0f);
}

TEST_CASE("rng is reproducible and derived streams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
  Rng c(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(c.index(7) < 7);
  }
}

TEST_CASE("identity kernel reproduces the input") {
  Rng rng(1);
  const auto x = random_tensor<float>({1, 1, 5, 5}, rng);
  ConvParams<float> p(1, 1, 3);
  p.weight.at(0, 0, 1, 1) = 1.0f;
  for (auto path : {ConvPath::direct, ConvPath::patch_matrix}) {
    const auto y = conv2d_forward(x, p, path);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
}

TEST_CASE("all-ones 3x3 convolution") {
  Tensor<float> x({1, 1, 3, 3}, 1.0f);
  ConvParams<float> p(1, 1, 3);
  p.weight.fill(1.0f);
  const float expected[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (auto path : {ConvPath::direct, ConvPath::patch_matrix}) {
    const auto y = conv2d_forward(x, p, path);
    for (int i = 0; i < 9; ++i) CHECK(y[i] == expected[i]);
  }
}

TEST_CASE("convolution matches the brute-force oracle") {
  Rng rng(5);
  const auto x = random_tensor<double>({2, 3, 8, 8}, rng);
  ConvParams<double> p(4, 3, 7);
  p.weight = random_tensor<double>(p.weight.shape(), rng);
  for (auto& b : p.bias) b = rng.uniform(-1, 1);
  std::size_t ho, wo;
  const auto ref = oracle::conv2d(as_vec(x), 2, 3, 8, 8, as_vec(p.weight), 4, 7, {p.bias.begin(), p.bias.end()}, 1, ho, wo);
  double scale = 0.0;
  for (double v : ref) scale = std::max(scale, std::abs(v));
  for (auto path : {ConvPath::direct, ConvPath::patch_matrix}) {
    const auto y = conv2d_forward(x, p, path);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y[i] - ref[i]) <= 1e-12 * scale);
  }
}

TEST_CASE("strided convolution extents and values") {
  Rng rng(9);
  for (std::size_t s : {2u, 3u}) {
    const auto x = random_tensor<double>({1, 2, 11, 8}, rng);
    ConvParams<double> p(3, 2, 3, s);
    p.weight = random_tensor<double>(p.weight.shape(), rng);
    std::size_t ho, wo;
    const auto ref = oracle::conv2d(as_vec(x), 1, 2, 11, 8, as_vec(p.weight), 3, 3, {}, s, ho, wo);
    const auto y = conv2d_forward(x, p);
    CHECK(y.shape() == Shape4{1, 3, (11 + s - 1) / s, (8 + s - 1) / s});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("stride-1 convolution preserves extents for odd kernels") {
  Rng rng(2);
  for (std::size_t k : {1u, 3u, 5u, 7u, 11u}) {
    for (std::size_t h : {1u, 2u, 9u}) {
      for (std::size_t w : {1u, 4u, 13u}) {
        ConvParams<float> p(2, 1, k);
        CHECK(conv2d_forward(Tensor<float>({1, 1, h, w}, 0.5f), p).shape() == Shape4{1, 2, h, w});
      }
    }
  }
}

TEST_CASE("convolution configuration errors") {
  CHECK_THROWS_AS(ConvParams<float>(1, 1, 4), ConfigError);
  ConvParams<float> p(2, 3, 3);
  CHECK_THROWS_AS(conv2d_forward(Tensor<float>({1, 2, 5, 5}), p), ShapeError);
  CHECK_THROWS_AS(conv2d_backward(Tensor<float>({1, 3, 5, 5}), p, Tensor<float>({1, 2, 4, 5})), ShapeError);
  p.stride = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("convolution backward trivial cases") {
  Rng rng(4);
  const auto x = random_tensor<float>({2, 3, 6, 6}, rng);
  ConvParams<float> p(2, 3, 3);
  p.weight = random_tensor<float>(p.weight.shape(), rng);
  const auto g = conv2d_backward(x, p, Tensor<float>({2, 2, 6, 6}));
  for (float v : g.input.values()) CHECK(v == 0.0f);
  for (float v : g.weight.values()) CHECK(v == 0.0f);
  for (float v : g.bias) CHECK(v == 0.0f);

  ConvParams<float> q(1, 1, 1);
  q.weight[0] = 0.7f;
  const auto s = conv2d_backward(Tensor<float>({1, 1, 1, 1}, 3.0f), q, Tensor<float>({1, 1, 1, 1}, 2.0f));
  CHECK(s.weight[0] == doctest::Approx(6.0));
  CHECK(s.bias[0] == doctest::Approx(2.0));
  CHECK(s.input[0] == doctest::Approx(1.4));
}

TEST_CASE("batch norm forward examples") {
  BatchNormParams<double> p(1);
  p.epsilon = 1e-12;
  const auto y = batchnorm_forward(Tensor<double>({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4}), p, NormMode::training);
  // Population variance 1.25: (x - 2.5) / sqrt(1.25).
  const double expect[4] = {-1.3416407865, -0.4472135955, 0.4472135955, 1.3416407865};
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-9));

  BatchNormParams<float> q(2);
  const auto z = batchnorm_forward(Tensor<float>({3, 2, 2, 2}, 4.0f), q, NormMode::training);
  for (float v : z.values()) CHECK(v == 0.0f);
}

TEST_CASE("batch norm normalizes whenever input variance exceeds 1e-3") {
  Rng rng(8);
  for (double spread : {0.0548, 0.1, 1.0, 30.0}) {
    auto x = random_tensor<float>({4, 3, 5, 5}, rng, -spread * std::sqrt(3.0), spread * std::sqrt(3.0));
    for (auto& v : x.values()) v += 7.0f;
    BatchNormParams<float> p(3);
    const auto y = batchnorm_forward(x, p, NormMode::training);
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0, v = 0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 25; ++i) m += y.plane(n, c)[i];
      m /= 100;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 25; ++i) v += (y.plane(n, c)[i] - m) * (y.plane(n, c)[i] - m);
      v /= 100;
      CHECK(std::abs(m) < 1e-5);
      CHECK(std::abs(v - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("batch norm running statistics") {
  BatchNormParams<double> p(1);
  CHECK_THROWS_AS(batchnorm_forward(Tensor<double>({1, 1, 2, 2}), p, NormMode::inference), ConfigError);
  const Tensor<double> a({1, 1, 1, 2}, std::vector<double>{0, 2});
  const Tensor<double> b({1, 1, 1, 2}, std::vector<double>{4, 6});
  batchnorm_forward(a, p, NormMode::training);
  CHECK(p.running_mean[0] == doctest::Approx(1.0));
  CHECK(p.running_var[0] == doctest::Approx(1.0));
  batchnorm_forward(b, p, NormMode::training);
  CHECK(p.running_mean[0] == doctest::Approx(0.99 * 1 + 0.01 * 5));
  CHECK(p.running_var[0] == doctest::Approx(1.0));
  const auto y = batchnorm_forward(Tensor<double>({1, 1, 1, 1}, 1.04), p, NormMode::inference);
  CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-6));
  for (double v : p.running_var) CHECK(v >= 0.0);
}

TEST_CASE("batch norm backward trivial cases") {
  Rng rng(3);
  BatchNormParams<double> p(2);
  const auto x = random_tensor<double>({2, 2, 3, 3}, rng);
  const auto g = batchnorm_backward(x, p, Tensor<double>(x.shape()), NormMode::training);
  for (double v : g.input.values()) CHECK(v == 0.0);
  for (double v : g.gamma) CHECK(v == 0.0);
  // With a single element per channel the statistics absorb the input.
  const auto one = random_tensor<double>({1, 2, 1, 1}, rng);
  const auto h = batchnorm_backward(one, p, random_tensor<double>(one.shape(), rng), NormMode::training);
  for (double v : h.input.values()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("activations") {
  const Tensor<float> x({1, 1, 1, 3}, std::vector<float>{-2, 3, 0});
  const auto r = relu(x);
  CHECK(r[0] == 0.0f);
  CHECK(r[1] == 3.0f);
  const auto rb = relu_backward(x, Tensor<float>(x.shape(), 5.0f));
  CHECK(rb[0] == 0.0f);
  CHECK(rb[1] == 5.0f);
  CHECK(tanh_act(Tensor<float>({1, 1, 1, 1}, 0.0f))[0] == 0.0f);
  Rng rng(1);
  const auto big = random_tensor<float>({1, 1, 10, 10}, rng, -50, 50);
  const auto squashed = tanh_act(big);
  for (float v : squashed.values()) CHECK((v >= -1.0f && v <= 1.0f));
  CHECK(activation_from_string("relu") == Activation::relu);
  CHECK_THROWS_AS(activation_from_string("gelu"), ConfigError);
}

TEST_CASE("mse loss") {
  const Tensor<float> y({1, 1, 1, 2}, std::vector<float>{1, -1});
  CHECK(mse_loss(y, y).value == 0.0);
  const auto r = mse_loss(Tensor<float>({1, 1, 1, 2}), y);
  CHECK(r.value == doctest::Approx(1.0));
  // grad = (2/n)(pred - target)
  CHECK(r.grad[0] == doctest::Approx(-1.0));
  CHECK(r.grad[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(mse_loss(Tensor<float>({1, 1, 1, 3}), y), ShapeError);
}

TEST_CASE("cross entropy loss") {
  const auto r = cross_entropy_loss(Tensor<double>({1, 1, 1, 1}, 0.5), Tensor<double>({1, 1, 1, 1}, 1.0));
  CHECK(r.value == doctest::Approx(0.693147180559945));
  const Tensor<double> t({1, 1, 1, 2}, std::vector<double>{0, 1});
  CHECK(cross_entropy_loss(t, t).value < 1e-6);
  CHECK_THROWS_AS(cross_entropy_loss(t, Tensor<double>({1, 1, 1, 2}, 0.5)), ConfigError);
  CHECK(loss_from_string("cross_entropy") == LossKind::cross_entropy);
}

TEST_CASE("adadelta hand-evaluated first step") {
  std::vector<double> x{0.0};
  const std::vector<double> g{1.0};
  std::vector<ParamSlot<double>> slots{{"x", x, g, true}};
  Adadelta opt;
  opt.step(std::span<ParamSlot<double>>(slots));
  // E[g2] = 0.05; dx = -sqrt(1e-6) / sqrt(0.05 + 1e-6) = -4.4721e-3
  CHECK(x[0] == doctest::Approx(-4.4721e-3).epsilon(1e-4));
}

TEST_CASE("adadelta zero gradient and frozen slots") {
  std::vector<float> a{1.0f, 2.0f}, b{3.0f};
  const std::vector<float> ga{0.0f, 0.0f}, gb{1.0f};
  std::vector<ParamSlot<float>> slots{{"a", a, ga, true}, {"b", b, gb, false}};
  Adadelta opt;
  for (int i = 0; i < 5; ++i) opt.step(std::span<ParamSlot<float>>(slots));
  CHECK(a[0] == 1.0f);
  CHECK(a[1] == 2.0f);
  CHECK(b[0] == 3.0f);
}

TEST_CASE("adadelta on x^2 matches a reference implementation") {
  std::vector<double> x{1.0};
  std::vector<double> ref{1.0};
  oracle::Adadelta o{0.95, 1e-6, {}, {}};
  Adadelta opt;
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> g{2.0 * x[0]};
    std::vector<ParamSlot<double>> slots{{"x", x, g, true}};
    opt.step(std::span<ParamSlot<double>>(slots));
    o.step(ref, {2.0 * ref[0]});
    CHECK(std::abs(x[0] - ref[0]) < 1e-10);
  }
  for (const auto& acc : opt.mean_sq_grad())
    for (double v : acc) CHECK(v >= 0.0);
}

TEST_CASE("adadelta stays finite for large finite gradients") {
  Rng rng(6);
  std::vector<float> w(64, 0.0f), g(64);
  std::vector<ParamSlot<float>> slots{{"w", w, g, true}};
  Adadelta opt;
  for (int s = 0; s < 200; ++s) {
    for (auto& v : g) v = static_cast<float>(rng.normal() * 1e18);
    opt.step(std::span<ParamSlot<float>>(slots));
    for (float v : w) REQUIRE(std::isfinite(v));
  }
  for (const auto& acc : opt.mean_sq_delta())
    for (double v : acc) CHECK(v >= 0.0);
}

TEST_CASE("he initialization statistics") {
  Rng a(17), b(17);
  const auto t = he_normal<double>({100000, 1, 1, 1}, 50, a);
  const auto u = he_normal<double>({100000, 1, 1, 1}, 50, b);
  for (std::size_t i = 0; i < t.size(); ++i) REQUIRE(t[i] == u[i]);
  double m = 0, v = 0;
  for (double x : t.values()) m += x;
  m /= 1e5;
  for (double x : t.values()) v += (x - m) * (x - m);
  v /= 1e5;
  CHECK(std::abs(v - 0.04) < 0.05 * 0.04);
  CHECK(std::abs(m) < 3.0 * 0.2 / std::sqrt(1e5));
}

TEST_CASE("gradient checker on a linear function") {
  const std::vector<double> c{1.5, -2.0, 0.25};
  const std::vector<double> p{0.3, 0.1, -4.0};
  const auto r = grad_check(
      [&](std::span<const double> x) { return c[0] * x[0] + c[1] * x[1] + c[2] * x[2]; }, p, c);
  CHECK(r.max_rel_error < 1e-10);
  CHECK(r.checked == 3);
  CHECK(relative_error(1.0, 1.0) == 0.0);
}
