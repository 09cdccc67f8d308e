#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anonet/model.hpp"

namespace anonet {

/// Normalization used by introspection when none is requested: running
/// statistics if the model has them, otherwise the input's own statistics.
template <typename T>
NormMode introspection_mode(const BasicModel<T>& model);

/// One (1, C_l, H_l, W_l) stack per layer, in forward order. The final
/// entry equals the model output.
std::vector<Tensor<float>> intermediate_activations(const Model& model, const Tensor<float>& x,
                                                    std::optional<NormMode> mode = {});
Tensor<float> layer_activation(const Model& model, const Tensor<float>& x, std::size_t layer,
                               std::optional<NormMode> mode = {});

/// Mean activation of `filter` at `layer` for input `x` (one image), and its
/// gradient with respect to `x`.
template <typename T>
std::pair<double, Tensor<T>> activation_objective(const BasicModel<T>& model, const Tensor<T>& x,
                                                  std::size_t layer, std::size_t filter,
                                                  NormMode mode);

struct ActMaxConfig {
  std::size_t layer = 0;
  std::size_t filter = 0;
  std::size_t steps = 500;
  double step_size = 1.0;  ///< applied to the L2-normalized gradient
  std::uint64_t seed = 0;
  /// Rescale X after every step back to the mean and spread of the start.
  bool standardize = false;
  std::size_t max_retries = 3;
  std::vector<std::size_t> snapshots{50, 100};
  std::size_t height = 64;
  std::size_t width = 64;

  void validate() const;
};

struct ActMaxResult {
  Tensor<float> image;           ///< X after the final step, (1, 1, H, W)
  std::vector<double> trace;     ///< objective before step 1 and after every step
  std::vector<std::pair<std::size_t, Tensor<float>>> snapshots;
  bool converged = true;
  bool unique = false;           ///< ascent from noise is not unique; always false
  std::size_t retries = 0;
  std::uint64_t seed_used = 0;
  NormMode mode = NormMode::inference;
  std::string note;

  /// Fraction of steps where the objective did not decrease.
  [[nodiscard]] double monotone_fraction() const;
  /// Columns: step,objective.
  [[nodiscard]] std::string trace_csv() const;
};

/// Gradient ascent on the input from seeded uniform [0, 1) noise. The model
/// is only read.
ActMaxResult activation_maximization(const Model& model, const ActMaxConfig& cfg);

}  // namespace anonet
