#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anonet/core/adadelta.hpp"
#include "anonet/core/loss.hpp"
#include "anonet/data.hpp"
#include "anonet/metrics.hpp"
#include "anonet/model.hpp"

namespace anonet {

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch = 16;
  LossKind loss = LossKind::mse;
  AdadeltaConfig adadelta{};
  std::uint64_t seed = 1;
  /// Save weights every this many epochs (0 disables); needs checkpoint_dir.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// When set, overrides the trainability of a filter-bank first layer.
  std::optional<bool> freeze_filters;
  double threshold = 0.0;
  Pooling pooling = Pooling::pooled;
  BatchMode batch_mode = BatchMode::group_by_size;
  bool shuffle = true;
  /// Before every validation, replace the BN inference statistics with
  /// population estimates over the training set under the current weights.
  bool recalibrate_bn = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double loss = 0.0;      ///< mean training-batch loss over the epoch
  std::size_t steps = 0;
  std::optional<MetricsReport> validation;
};

struct TrainHistory {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;
  std::vector<EpochRecord> epochs;

  /// Columns: epoch,loss,f1,auroc (empty metric cells without validation).
  [[nodiscard]] std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Applies cfg.freeze_filters to the model's filter-bank layer, if any.
void apply_freeze(Model& model, const TrainConfig& cfg);

/// Per-image training targets at the model's output resolution.
Mask target_mask(const Model& model, const Mask& full);

/// Loss of `pred` (tanh outputs) against a ±1 target, with the gradient
/// with respect to `pred`. Cross entropy maps both to (0, 1) first.
LossResult<float> training_loss(LossKind kind, const Tensor<float>& pred, const Tensor<float>& target);

/// Sets every BN layer's inference mean and variance to the averages of the
/// per-batch statistics seen over `ds` (fixed order) in training mode.
void recalibrate_batchnorm(Model& model, const Dataset& ds, const TrainConfig& cfg);

/// Mean batch loss over the dataset in fixed order, batch statistics for
/// normalization; the model is not modified.
double dataset_loss(const Model& model, const Dataset& ds, const TrainConfig& cfg);

/// Inference-mode forward of each image on its own, scored against its mask.
MetricsReport validate(const Model& model, const Dataset& ds, double threshold = 0.0,
                       Pooling pooling = Pooling::pooled);

/// Adadelta training loop. Validation (when `val` is non-empty) runs after
/// every epoch. A non-finite loss or parameter restores the weights of the
/// last completed epoch and throws NumericError.
TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace anonet
