#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anonet/data.hpp"

namespace anonet {

/// Parameters of the textured-surface generator. Backgrounds are value
/// noise (octaves halving in period from `base_period`) smoothed by a
/// Gaussian and rescaled to the requested mean and spread. Each defective
/// image gets one darker elliptical smudge.
struct SynthSpec {
  std::size_t count = 80;
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t octaves = 5;
  double base_period = 32.0;
  double persistence = 0.6;
  double blur_sigma = 1.0;
  double background_mean = 0.55;
  double background_std = 0.07;
  double axis_min = 5.0;  ///< semi-axis lengths, pixels
  double axis_max = 10.0;
  double delta_min = 0.15;  ///< smudge darkening
  double delta_max = 0.3;
  double core = 0.8;        ///< smudge is at full depth for r <= core, tapering to r = 1
  double weak_scale = 1.15; ///< weak label is the ellipse r <= weak_scale
  double defect_free_fraction = 0.0;
  std::uint64_t seed = 7;
  std::string name = "synth";

  /// Throws ConfigError on an inconsistent spec.
  void validate() const;
};

struct SynthRecord {
  std::string id;
  bool defective = false;
  double center_y = 0.0;
  double center_x = 0.0;
  double axis_a = 0.0;
  double axis_b = 0.0;
  double angle = 0.0;
  double delta = 0.0;
  double contrast = 0.0;  ///< measured: background mean minus tight-mask mean
  std::uint64_t seed = 0;
};

struct SynthResult {
  Dataset dataset;
  std::vector<SynthRecord> records;
};

SynthResult synth_generate(const SynthSpec& spec);

/// One JSON object per line, in sample order.
std::string manifest_jsonl(const SynthSpec& spec, const std::vector<SynthRecord>& records);
/// Dataset layout plus `manifest.jsonl`.
void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthResult& r);

}  // namespace anonet
