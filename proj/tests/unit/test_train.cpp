#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "anonet/core/errors.hpp"
#include "anonet/serialize.hpp"
#include "anonet/synth.hpp"
#include "anonet/train.hpp"
#include "oracles.hpp"

using namespace anonet;

namespace {

Dataset tiny(std::size_t count, std::uint64_t seed = 7) {
  SynthSpec s;
  s.count = count;
  s.height = 32;
  s.width = 32;
  s.axis_min = 4;
  s.axis_max = 6;
  s.seed = seed;
  return synth_generate(s).dataset;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch = 4;
  return c;
}

}  // namespace

TEST_CASE("training reduces the loss and records history") {
  const auto ds = tiny(10), val = tiny(3, 99);
  auto m = build_model("SExp1", 1);
  std::size_t calls = 0;
  const auto h = train(m, ds, val, quick(3), [&](const EpochRecord& r) { CHECK(r.epoch == ++calls); });
  CHECK(calls == 3);
  REQUIRE(h.epochs.size() == 3);
  CHECK(h.steps == 9);
  CHECK(h.final_loss < h.initial_loss);
  for (const auto& e : h.epochs) {
    REQUIRE(e.validation.has_value());
    CHECK(e.validation->epoch == e.epoch);
    CHECK(std::isfinite(e.validation->f1));
    CHECK(e.validation->auroc.has_value());
  }
  const auto csv = h.to_csv();
  CHECK(csv.rfind("epoch,loss,f1,auroc\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("frozen filter layer stays bitwise fixed") {
  const auto ds = tiny(8);
  auto m = build_model("SExp1", 2);
  const auto bank = build_schmid(7).to_weights<float>();
  train(m, ds, {}, quick(2));
  const auto& w = m.layers()[0].conv.weight;
  CHECK(std::memcmp(w.data(), bank.data(), bank.size() * 4) == 0);
  CHECK(m.layers()[0].conv.bias == std::vector<float>(13, 0.0f));

  auto t = build_model("SExp1", 2);
  auto cfg = quick(1);
  cfg.freeze_filters = false;
  train(t, ds, {}, cfg);
  CHECK(std::memcmp(t.layers()[0].conv.weight.data(), bank.data(), bank.size() * 4) != 0);
  CHECK(t.layers()[0].spec.trainable);
}

TEST_CASE("training is deterministic") {
  const auto ds = tiny(8), val = tiny(2, 5);
  auto a = build_model("Exp6", 3), b = build_model("Exp6", 3);
  const auto ha = train(a, ds, val, quick(2));
  const auto hb = train(b, ds, val, quick(2));
  CHECK(encode_weights(a) == encode_weights(b));
  CHECK(ha.to_csv() == hb.to_csv());
  CHECK(ha.epochs.back().validation->csv_row() == hb.epochs.back().validation->csv_row());
  auto c = build_model("Exp6", 3);
  auto cfg = quick(2);
  cfg.seed = 2;
  train(c, ds, val, cfg);
  CHECK(encode_weights(a) != encode_weights(c));
}

TEST_CASE("checkpoints") {
  const auto dir = oracle::tmp_dir("checkpoints");
  auto m = build_model("Exp6", 1);
  auto cfg = quick(3);
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = dir;
  train(m, tiny(4), {}, cfg);
  CHECK(std::filesystem::exists(dir / "epoch_002.anw"));
  CHECK(std::filesystem::exists(dir / "epoch_003.anw"));
  CHECK_FALSE(std::filesystem::exists(dir / "epoch_001.anw"));
  CHECK(encode_weights(load_weights(dir / "epoch_003.anw")) == encode_weights(m));
}

TEST_CASE("non-finite loss aborts and restores weights") {
  auto ds = tiny(4);
  ds.samples[1].image.pixels[10] = std::numeric_limits<float>::quiet_NaN();
  auto m = build_model("Exp6", 1);
  const auto before = encode_weights(m);
  CHECK_THROWS_AS(train(m, ds, {}, quick(2)), NumericError);
  CHECK(encode_weights(m) == before);
}

TEST_CASE("population statistics for batch norm") {
  const auto ds = tiny(4);
  auto m = build_model("SExp1", 4);
  auto cfg = quick(1);
  recalibrate_batchnorm(m, ds, cfg);
  const auto b = make_batches(ds, 4, 1, 0, false);
  REQUIRE(b.size() == 1);
  const auto t = m.forward_trace(b[0].images, NormMode::training);
  const auto& z = t.conv_out[1];
  for (std::size_t c = 0; c < z.shape().c; ++c) {
    double s = 0, s2 = 0, n = 0;
    for (std::size_t i = 0; i < z.shape().n; ++i)
      for (std::size_t p = 0; p < z.shape().plane(); ++p) {
        s += z.plane(i, c)[p];
        s2 += double(z.plane(i, c)[p]) * z.plane(i, c)[p];
        n += 1;
      }
    const double mean = s / n;
    CHECK(m.layers()[1].bn->running_mean[c] == doctest::Approx(mean).epsilon(1e-4));
    CHECK(m.layers()[1].bn->running_var[c] == doctest::Approx(s2 / n - mean * mean).epsilon(1e-3));
  }
  // With population statistics, inference on the calibration batch matches training mode.
  const auto inf = m.forward(b[0].images, NormMode::inference);
  const auto trn = m.forward(b[0].images, NormMode::training);
  for (std::size_t i = 0; i < inf.size(); ++i) CHECK(inf[i] == doctest::Approx(trn[i]).epsilon(1e-3));
}

TEST_CASE("targets and losses") {
  Mask full(9, 9);
  full.at(8, 8) = 1;
  const auto strided = build_model("Exp2", 1);
  const auto t = target_mask(strided, full);
  CHECK(t == downsample_mask(full, 4));
  CHECK(target_mask(build_model("Exp4", 1), full) == full);

  Tensor<float> pred({1, 1, 1, 2}, std::vector<float>{0.5f, -0.5f});
  Tensor<float> target({1, 1, 1, 2}, std::vector<float>{1.0f, -1.0f});
  const auto mse = training_loss(LossKind::mse, pred, target);
  CHECK(mse.value == doctest::Approx(0.25));
  const auto ce = training_loss(LossKind::cross_entropy, pred, target);
  // p = 0.75 for both pixels against targets 1 and 0.
  CHECK(ce.value == doctest::Approx(-std::log(0.75)).epsilon(1e-6));
  CHECK(ce.grad[0] < 0);
  CHECK(ce.grad[1] > 0);
}

TEST_CASE("validation and config errors") {
  const auto m = build_model("Exp6", 1);
  CHECK_THROWS_AS(validate(m, Dataset{}), ConfigError);
  auto cfg = quick(1);
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick(0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  auto n = build_model("Exp6", 1);
  CHECK_THROWS_AS(train(n, Dataset{}, {}, quick(1)), ConfigError);
  CHECK_THROWS_AS(validate(n, tiny(2)), ConfigError);
  recalibrate_batchnorm(n, tiny(2), quick(1));
  const auto report = validate(n, tiny(2));
  CHECK(report.parameters == count_parameters(n));
}
