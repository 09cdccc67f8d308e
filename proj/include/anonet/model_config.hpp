#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anonet/core/activation.hpp"
#include "anonet/filterbank.hpp"

namespace anonet {

enum class InitKind { he, unit_normal, filterbank };
enum class Provenance { table1, table2, baseline, custom };
/// Transform applied to each input image before the first layer. `center`
/// subtracts the image's own mean, so zero padding matches the average level.
enum class InputNorm { none, center };

const char* to_string(InitKind k);
const char* to_string(Provenance p);
const char* to_string(InputNorm n);
InputNorm input_norm_from_string(const std::string& s);

/// One convolution + optional batch norm + activation. Padding is implied:
/// always (kernel - 1) / 2.
struct LayerSpec {
  std::size_t kernel = 3;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  Activation activation = Activation::relu;
  bool batchnorm = true;
  bool trainable = true;
  InitKind init = InitKind::he;
  FilterFamily family = FilterFamily::S;  ///< only meaningful for InitKind::filterbank

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
  std::string name;
  std::vector<LayerSpec> layers;
  Provenance provenance = Provenance::custom;
  InputNorm input_norm = InputNorm::center;

  /// Throws ConfigError unless the network is a plain conv stack ending in a
  /// single-channel tanh segmentation layer, with tanh nowhere else.
  void validate() const;
  /// Product of all strides: an H x W input maps to ceil(H/s) x ceil(W/s).
  [[nodiscard]] std::size_t total_stride() const;
};

struct FilterConfigRow {
  const char* name;
  FilterFamily family;
  std::size_t kernel;
  bool trainable;
};

struct AblationRow {
  const char* name;
  std::size_t stride;
  std::size_t layers_per_block;
  std::size_t kernels[3];
  std::size_t depths[3];
};

/// The twelve filter-bank seeded networks (LMExp1 .. SExp4).
const std::vector<FilterConfigRow>& filter_config_rows();
/// The nine ablation networks (Exp1 .. Exp9).
const std::vector<AblationRow>& ablation_rows();

/// Filter-bank seeded network: filter layer k x k x n, then 7x7x32, 3x3x32
/// (ReLU + BN) and a 1x1x1 tanh segmentation layer, all stride 1.
ModelConfig anonet_config(const std::string& name);
/// Three conv blocks per the ablation row followed by the 1x1x1 tanh head.
ModelConfig ablation_config(const std::string& name);
/// Segmentation part of CompactCNN with a tanh head (the Exp1 topology).
ModelConfig baseline_config();
/// Any of the above by name; "CompactCNN" is the baseline.
ModelConfig config_by_name(const std::string& name);

std::vector<std::string> filter_config_names();
std::vector<std::string> ablation_names();

/// Copy of `cfg` with every non-filter-bank layer switched to `init`.
ModelConfig with_hidden_init(ModelConfig cfg, InitKind init);

}  // namespace anonet
