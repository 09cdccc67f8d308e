#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "anonet/cli/commands.hpp"
#include "anonet/data.hpp"
#include "anonet/image.hpp"
#include "anonet/serialize.hpp"
#include "oracles.hpp"

using namespace anonet;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "anonet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json small_config() {
  return {{"model", "Exp6"},
          {"synth", {{"count", 10}, {"height", 32}, {"width", 32}, {"axis_min", 4}, {"axis_max", 6}}},
          {"train", {{"epochs", 2}, {"batch", 4}}}};
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j, const std::string& name = "cfg.json") {
  std::ofstream(dir / name) << j.dump();
  return dir / name;
}

}  // namespace

TEST_CASE("synth and filterbank commands") {
  const auto dir = oracle::tmp_dir("cli_synth");
  const auto cfg = write_config(dir, small_config());
  CHECK(run({"synth", "--config", cfg.string(), "--out", (dir / "ds").string(), "--count", "4"}) == 0);
  CHECK(load_dataset(dir / "ds").size() == 4);
  CHECK(fs::exists(dir / "ds" / "manifest.jsonl"));
  CHECK(fs::exists(dir / "ds" / "resolved_config.json"));

  CHECK(run({"filterbank", "--family", "RFS", "--k", "11", "--out", (dir / "fb").string()}) == 0);
  std::string name;
  const auto t = read_tensor_file(dir / "fb" / "RFS_11.ant", &name);
  CHECK(t.shape() == Shape4{38, 1, 11, 11});
  CHECK(fs::exists(dir / "fb" / "RFS_11.png"));
  const auto meta = slurp(dir / "fb" / "RFS_11.csv");
  CHECK(std::count(meta.begin(), meta.end(), '\n') == 39);
  CHECK(run({"filterbank", "--family", "RFS", "--k", "10", "--out", (dir / "fb").string()}) == cli::bad_config);
}

TEST_CASE("train, eval, infer and visualize") {
  const auto dir = oracle::tmp_dir("cli_train");
  const auto cfg = write_config(dir, small_config());
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(run({"train", "--config", cfg.string(), "--out", a.string()}) == 0);
  for (const char* f : {"weights.anw", "history.csv", "metrics.csv", "report.json", "resolved_config.json"})
    CHECK(fs::exists(a / f));
  const auto metrics = slurp(a / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
  REQUIRE(run({"train", "--config", cfg.string(), "--out", b.string()}) == 0);
  CHECK(slurp(a / "weights.anw") == slurp(b / "weights.anw"));
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(load_weights(a / "weights.anw").config().name == "Exp6");

  const auto resolved = nlohmann::json::parse(slurp(a / "resolved_config.json"));
  CHECK(resolved.at("train").at("epochs") == 2);
  CHECK(run({"train", "--config", (a / "resolved_config.json").string(), "--out", (dir / "c").string()}) == 0);
  CHECK(slurp(a / "weights.anw") == slurp(dir / "c" / "weights.anw"));

  REQUIRE(run({"eval", "--config", cfg.string(), "--weights", (a / "weights.anw").string(), "--out",
               (dir / "e").string(), "--split", "all", "--scores"}) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
  CHECK(rep.at("f1").is_number());
  CHECK(fs::exists(dir / "e" / "scores" / "00000.ant"));

  REQUIRE(run({"synth", "--config", cfg.string(), "--out", (dir / "ds").string()}) == 0);
  const auto img = dir / "ds" / "images" / "00003.png";
  REQUIRE(run({"infer", "--weights", (a / "weights.anw").string(), "--image", img.string(), "--out",
               (dir / "i").string()}) == 0);
  const auto mask = read_image(dir / "i" / "00003_mask.png");
  CHECK(mask.height == 32);
  CHECK(mask.width == 32);

  REQUIRE(run({"visualize", "--weights", (a / "weights.anw").string(), "--image", img.string(), "--actmax",
               "--layer", "1", "--filter", "2", "--steps", "20", "--size", "16", "--out", (dir / "v").string()}) == 0);
  CHECK(fs::exists(dir / "v" / "layer_00.png"));
  CHECK(fs::exists(dir / "v" / "actmax_summary.csv"));
  CHECK(fs::exists(dir / "v" / "actmax_l01_f002_trace.csv"));
}

TEST_CASE("flags override the config") {
  const auto dir = oracle::tmp_dir("cli_flags");
  const auto cfg = write_config(dir, small_config());
  REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "s").string(), "--model", "SExp1", "--epochs", "1",
               "--loss", "cross_entropy", "--freeze-filters", "false", "--seed", "9"}) == 0);
  const auto r = nlohmann::json::parse(slurp(dir / "s" / "resolved_config.json"));
  CHECK(r.at("model") == "SExp1");
  CHECK(r.at("seed") == 9);
  CHECK(r.at("train").at("loss") == "cross_entropy");
  CHECK(r.at("train").at("freeze_filters") == false);
  CHECK(load_weights(dir / "s" / "weights.anw").layers()[0].spec.trainable);
}

TEST_CASE("loss comparison sweep") {
  const auto dir = oracle::tmp_dir("cli_sweep");
  auto j = small_config();
  j["train"]["epochs"] = 1;
  const auto cfg = write_config(dir, j);
  REQUIRE(run({"sweep", "loss", "--config", cfg.string(), "--out", dir.string(), "--jobs", "2"}) == 0);
  const auto csv = slurp(dir / "loss_comparison.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("mse") != std::string::npos);
  CHECK(csv.find("cross_entropy") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = oracle::tmp_dir("cli_errors");
  auto j = small_config();
  j["trian"] = {{"epochs", 1}};
  const auto typo = write_config(dir, j, "typo.json");
  CHECK(run({"train", "--config", typo.string(), "--out", (dir / "x").string()}) == cli::bad_config);
  j = small_config();
  j["train"]["epoch"] = 1;
  CHECK(run({"train", "--config", write_config(dir, j, "nested.json").string()}) == cli::bad_config);
  CHECK(run({"train", "--config", (dir / "absent.json").string()}) == cli::missing_file);
  CHECK(run({"train", "--config", write_config(dir, small_config()).string(), "--model", "Exp99"}) == cli::bad_config);
  CHECK(run({"train", "--config", write_config(dir, small_config()).string(), "--loss", "hinge"}) == cli::bad_config);
  CHECK(run({"bogus"}) == cli::bad_config);
  CHECK(run({"eval", "--weights", (dir / "none.anw").string()}) == cli::missing_file);
  std::ofstream(dir / "junk.anw") << "not a weight file";
  CHECK(run({"infer", "--weights", (dir / "junk.anw").string(), "--image", (dir / "junk.anw").string()}) ==
        cli::bad_file);

  // A mask whose size disagrees with its image.
  const auto ds = dir / "mismatch";
  fs::create_directories(ds / "images");
  fs::create_directories(ds / "masks");
  write_image(ds / "images" / "a.png", GrayImage(16, 16, 0.5f));
  write_image(ds / "masks" / "a.png", GrayImage(8, 16, 0.0f));
  CHECK(run({"train", "--config", write_config(dir, small_config()).string(), "--dataset", ds.string(), "--out",
             (dir / "y").string()}) == cli::shape_mismatch);

  j = small_config();
  j["train"]["learning_rate"] = 1e38;
  const int code = run({"train", "--config", write_config(dir, j, "explode.json").string(), "--out", (dir / "z").string()});
  CHECK(code == cli::numeric_abort);
  if (code == cli::numeric_abort) CHECK(fs::exists(dir / "z" / "last_good.anw"));
}
