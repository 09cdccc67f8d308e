#include <doctest.h>

#include <cstring>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"
#include "anonet/image.hpp"
#include "anonet/serialize.hpp"
#include "gradsuite.hpp"
#include "oracles.hpp"

using namespace anonet;

namespace {

Model trained_ish(const std::string& name, std::uint64_t seed) {
  auto m = build_model(name, seed);
  Rng rng(seed);
  m.forward_trace(gradsuite::rand_t({2, 1, 12, 12}, rng, 0, 1).cast<float>(), NormMode::training, true);
  return m;
}

void check_same(const Model& a, const Model& b) {
  CHECK(a.config().name == b.config().name);
  CHECK(a.config().layers == b.config().layers);
  CHECK(a.config().provenance == b.config().provenance);
  CHECK(a.config().input_norm == b.config().input_norm);
  REQUIRE(a.layers().size() == b.layers().size());
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    const auto& la = a.layers()[i];
    const auto& lb = b.layers()[i];
    CHECK(la.conv.weight.shape() == lb.conv.weight.shape());
    CHECK(std::memcmp(la.conv.weight.data(), lb.conv.weight.data(), la.conv.weight.size() * 4) == 0);
    CHECK(la.conv.bias == lb.conv.bias);
    CHECK(la.conv.trainable == lb.conv.trainable);
    REQUIRE(la.bn.has_value() == lb.bn.has_value());
    if (la.bn) {
      CHECK(la.bn->gamma == lb.bn->gamma);
      CHECK(la.bn->running_mean == lb.bn->running_mean);
      CHECK(la.bn->running_var == lb.bn->running_var);
      CHECK(la.bn->running_initialized == lb.bn->running_initialized);
      CHECK(la.bn->epsilon == lb.bn->epsilon);
    }
  }
}

}  // namespace

TEST_CASE("weight round trip") {
  for (const char* name : {"SExp1", "RFSExp4", "Exp2", "Exp6"}) {
    CAPTURE(name);
    const auto m = trained_ish(name, 3);
    const auto bytes = encode_weights(m);
    CHECK(std::memcmp(bytes.data(), "ANONETW1", 8) == 0);
    CHECK(bytes[8] == 1);
    const auto back = decode_weights(bytes);
    check_same(m, back);
    CHECK(encode_weights(back) == bytes);
  }
  auto cfg = ablation_config("Exp4");
  cfg.input_norm = InputNorm::none;
  const Model untouched(cfg, 1);
  check_same(untouched, decode_weights(encode_weights(untouched)));
}

TEST_CASE("file round trip and shape checking") {
  const auto dir = oracle::tmp_dir("serialize");
  const auto m = trained_ish("SExp1", 4);
  save_weights(m, dir / "w.anw");
  check_same(m, load_weights(dir / "w.anw"));
  auto same = build_model("SExp1", 9);
  load_weights_into(same, dir / "w.anw");
  check_same(m, same);
  auto other = build_model("SExp3", 9);
  CHECK_THROWS_AS(load_weights_into(other, dir / "w.anw"), ShapeError);
  CHECK_THROWS_AS(load_weights(dir / "missing.anw"), FormatError);
}

TEST_CASE("corrupt weight files are rejected") {
  const auto bytes = encode_weights(trained_ish("Exp4", 5));
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    auto b = bytes;
    b[rng.index(b.size())] ^= static_cast<std::uint8_t>(1 + rng.index(255));
    CHECK_THROWS_AS(decode_weights(b), FormatError);
  }
  for (std::size_t cut : {0ul, 7ul, 11ul, 40ul, bytes.size() - 1}) {
    std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_weights(b), FormatError);
  }
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_weights(extra), FormatError);
}

TEST_CASE("tensor file round trip") {
  const auto dir = oracle::tmp_dir("tensor_file");
  const auto t = build_lm(7).to_weights<float>();
  write_tensor_file(dir / "lm.ant", t, "LM_7");
  std::string name;
  const auto back = read_tensor_file(dir / "lm.ant", &name);
  CHECK(name == "LM_7");
  CHECK(back.shape() == t.shape());
  CHECK(std::equal(t.values().begin(), t.values().end(), back.values().begin()));
  auto bytes = read_file_bytes(dir / "lm.ant");
  bytes[30] ^= 0x10;
  write_file_bytes(dir / "bad.ant", bytes);
  CHECK_THROWS_AS(read_tensor_file(dir / "bad.ant"), FormatError);
}

TEST_CASE("image round trip") {
  const auto dir = oracle::tmp_dir("images");
  GrayImage img(13, 21);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = float(i % 256) / 255.0f;
  for (const char* ext : {".png", ".pgm"}) {
    const auto p = dir / (std::string("a") + ext);
    write_image(p, img);
    CHECK(is_image_file(p));
    const auto back = read_image(p);
    CHECK(back.height == 13);
    CHECK(back.width == 21);
    CHECK(back.pixels == img.pixels);
  }
  GrayImage wild(2, 2);
  wild.pixels = {-1.0f, 2.0f, 0.5f, 0.25f};
  write_image(dir / "c.png", wild);
  const auto c = read_image(dir / "c.png");
  CHECK(c.pixels[0] == 0.0f);
  CHECK(c.pixels[1] == 1.0f);
  CHECK(c.pixels[2] == doctest::Approx(128.0 / 255.0));
  write_file_bytes(dir / "junk.png", std::vector<std::uint8_t>{1, 2, 3});
  CHECK_THROWS_AS(read_image(dir / "junk.png"), FormatError);
  CHECK_FALSE(is_image_file(dir / "notes.txt"));
}
