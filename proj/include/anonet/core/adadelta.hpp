#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace anonet {

/// A parameter buffer as seen by an optimizer.
template <typename T>
struct ParamSlot {
  std::string name;
  std::span<T> value;
  std::span<const T> grad;
  bool trainable = true;
};

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  double learning_rate = 1.0;
};

/// Adadelta with per-element running averages E[g^2] and E[dx^2]:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + lr * dx
/// Frozen slots are skipped entirely and keep zero accumulators.
class Adadelta {
 public:
  explicit Adadelta(AdadeltaConfig cfg = {}) : cfg_(cfg) {}

  template <typename T>
  void step(std::span<ParamSlot<T>> slots);

  [[nodiscard]] const AdadeltaConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t steps_taken() const { return steps_; }
  [[nodiscard]] const std::vector<std::vector<double>>& mean_sq_grad() const { return eg2_; }
  [[nodiscard]] const std::vector<std::vector<double>>& mean_sq_delta() const {
    return edx2_;
  }

 private:
  AdadeltaConfig cfg_;
  std::vector<std::vector<double>> eg2_;
  std::vector<std::vector<double>> edx2_;
  std::size_t steps_ = 0;
};

}  // namespace anonet
