#include <doctest.h>

#include <cmath>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"
#include "anonet/export.hpp"
#include "anonet/image.hpp"
#include "anonet/introspect.hpp"
#include "gradsuite.hpp"
#include "oracles.hpp"

using namespace anonet;

namespace {

// conv 3x3 (positive weights, no BN) -> ReLU -> 1x1 tanh head, no input centering.
Model positive_linear_model() {
  ModelConfig cfg;
  cfg.name = "positive";
  cfg.input_norm = InputNorm::none;
  cfg.layers = {{3, 2, 1, Activation::relu, false, true, InitKind::he, FilterFamily::S},
                {1, 1, 1, Activation::tanh, false, true, InitKind::he, FilterFamily::S}};
  Model m(cfg, 1);
  Rng rng(3);
  for (auto& w : m.layers()[0].conv.weight.values()) w = static_cast<float>(rng.uniform(0.1, 1.0));
  for (auto& b : m.layers()[0].conv.bias) b = 0.0f;
  return m;
}

Model calibrated(const std::string& name) {
  auto m = build_model(name, 1);
  Rng rng(8);
  m.forward_trace(gradsuite::rand_t({2, 1, 16, 16}, rng, 0, 1).cast<float>(), NormMode::training, true);
  return m;
}

}  // namespace

TEST_CASE("intermediate activations") {
  const auto m = calibrated("SExp1");
  CHECK(introspection_mode(m) == NormMode::inference);
  CHECK(introspection_mode(build_model("SExp1", 1)) == NormMode::training);
  Rng rng(1);
  const auto x = gradsuite::rand_t({1, 1, 20, 24}, rng, 0, 1).cast<float>();
  const auto acts = intermediate_activations(m, x);
  REQUIRE(acts.size() == 4);
  CHECK(acts[0].shape() == Shape4{1, 13, 20, 24});
  CHECK(acts[1].shape() == Shape4{1, 32, 20, 24});
  CHECK(acts[3].values().size() == 20 * 24);
  const auto y = m.forward(x);
  CHECK(std::equal(y.values().begin(), y.values().end(), acts[3].values().begin()));
  const auto l2 = layer_activation(m, x, 2);
  CHECK(std::equal(l2.values().begin(), l2.values().end(), acts[2].values().begin()));
  CHECK_THROWS_AS(layer_activation(m, x, 4), ConfigError);
  for (float v : acts[0].values()) CHECK(v >= 0.0f);
}

TEST_CASE("ascent on a positive linear response") {
  const auto m = positive_linear_model();
  ActMaxConfig cfg;
  cfg.layer = 0;
  cfg.filter = 1;
  cfg.steps = 40;
  cfg.step_size = 0.05;
  cfg.height = cfg.width = 12;
  cfg.seed = 4;
  cfg.snapshots = {10, 20};
  const auto r = activation_maximization(m, cfg);
  REQUIRE(r.trace.size() == 41);
  CHECK(r.monotone_fraction() == 1.0);
  CHECK(r.converged);
  CHECK_FALSE(r.unique);
  CHECK(r.retries == 0);
  REQUIRE(r.snapshots.size() == 2);
  CHECK(r.snapshots[0].first == 10);
  // While every unit stays active the objective is linear in X, so one
  // normalized step of size a raises it by a * |grad|.
  Tensor<double> x0 = r.snapshots[0].second.cast<double>();
  const auto [f0, g] = activation_objective(m.cast<double>(), x0, 0, 1, NormMode::inference);
  double gn = 0;
  for (double v : g.values()) gn += v * v;
  gn = std::sqrt(gn);
  CHECK(r.trace[11] - r.trace[10] == doctest::Approx(cfg.step_size * gn).epsilon(1e-3));
  CHECK(f0 == doctest::Approx(r.trace[10]).epsilon(1e-5));
  const auto csv = r.trace_csv();
  CHECK(csv.rfind("step,objective\n0,", 0) == 0);

  const auto again = activation_maximization(m, cfg);
  CHECK(again.trace == r.trace);
  CHECK(std::equal(again.image.values().begin(), again.image.values().end(), r.image.values().begin()));
}

TEST_CASE("standardized ascent keeps the input statistics") {
  const auto m = calibrated("SExp1");
  ActMaxConfig cfg;
  cfg.layer = 2;
  cfg.filter = 3;
  cfg.steps = 20;
  cfg.height = cfg.width = 16;
  cfg.standardize = true;
  cfg.snapshots = {};
  const auto r = activation_maximization(m, cfg);
  double s = 0, s2 = 0;
  for (float v : r.image.values()) {
    s += v;
    s2 += double(v) * v;
  }
  const double n = 256, mean = s / n;
  CHECK(std::abs(mean - 0.5) < 0.1);
  CHECK(std::sqrt(s2 / n - mean * mean) == doctest::Approx(std::sqrt(1.0 / 12)).epsilon(0.2));
  CHECK(r.mode == NormMode::inference);
}

TEST_CASE("dead filters are reported") {
  auto m = positive_linear_model();
  for (std::size_t i = 0; i < 9; ++i) m.layers()[0].conv.weight[i] = 0.0f;
  ActMaxConfig cfg;
  cfg.filter = 0;
  cfg.steps = 5;
  cfg.height = cfg.width = 8;
  cfg.snapshots = {};
  const auto r = activation_maximization(m, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.retries == cfg.max_retries);
  CHECK_FALSE(r.note.empty());
  cfg.filter = 5;
  CHECK_THROWS_AS(activation_maximization(m, cfg), ConfigError);
  cfg.filter = 0;
  cfg.steps = 0;
  CHECK_THROWS_AS(activation_maximization(m, cfg), ConfigError);
}

TEST_CASE("image export") {
  Tensor<float> stack({1, 3, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) stack[i] = float(i);
  for (std::size_t i = 4; i < 8; ++i) stack[i] = 7.0f;
  for (std::size_t i = 8; i < 12; ++i) stack[i] = -float(i);
  const auto g = tile_grid(stack, 2);
  CHECK(g.height == 5);
  CHECK(g.width == 5);
  CHECK(g.at(0, 0) == 0.0f);
  CHECK(g.at(1, 1) == 1.0f);
  CHECK(g.at(0, 2) == 1.0f);  // gap
  CHECK(g.at(0, 3) == 0.5f);  // constant tile
  CHECK(g.at(3, 0) == 1.0f);
  CHECK(g.at(4, 1) == 0.0f);
  const auto big = tile_grid(stack, 3, 2);
  CHECK(big.height == 4);
  CHECK(big.width == 14);
  const auto sheet = filter_contact_sheet(build_schmid(7), 13, 1);
  CHECK(sheet.width == 13 * 7 + 12);

  const auto dir = oracle::tmp_dir("export");
  Tensor<float> scores({1, 1, 2, 2}, std::vector<float>{-0.5f, 0.5f, 0.0f, 1.0f});
  write_score_mask(dir / "m.png", scores);
  const auto img = read_image(dir / "m.png");
  CHECK(img.pixels == std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
}
