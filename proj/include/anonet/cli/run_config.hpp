#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "anonet/data.hpp"
#include "anonet/model.hpp"
#include "anonet/synth.hpp"
#include "anonet/train.hpp"

namespace anonet::cli {

/// Everything a run needs. Serialized as JSON; see docs/FORMATS.md.
struct RunConfig {
  std::string model = "SExp1";
  std::uint64_t seed = 1;  ///< weight initialization
  InitKind hidden_init = InitKind::he;
  bool normalize_filters = true;
  InputNorm input_norm = InputNorm::center;

  std::optional<std::filesystem::path> dataset;  ///< directory; otherwise `synth`
  SynthSpec synth{};
  double validation_fraction = 0.2;
  std::uint64_t split_seed = 11;
  bool allow_defect_free = false;
  std::size_t dilate = 0;

  TrainConfig train{};
  std::filesystem::path output_dir;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Starts from defaults; unknown keys at any level are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

/// Reads the run's dataset (loading or synthesizing) and splits it.
std::pair<Dataset, Dataset> load_split(const RunConfig& rc);
/// Fresh model per the run's initialization settings.
Model build_run_model(const RunConfig& rc);
/// Same with a different configuration name.
Model build_run_model(const RunConfig& rc, const std::string& name);

/// Writes `resolved_config.json` into the output directory.
void write_snapshot(const RunConfig& rc);

}  // namespace anonet::cli
