#include "anonet/core/adadelta.hpp"

#include <cmath>

#include "anonet/core/errors.hpp"

namespace anonet {

template <typename T>
void Adadelta::step(std::span<ParamSlot<T>> slots) {
  if (eg2_.empty()) {
    eg2_.resize(slots.size());
    edx2_.resize(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      eg2_[i].assign(slots[i].value.size(), 0.0);
      edx2_[i].assign(slots[i].value.size(), 0.0);
    }
  }
  if (eg2_.size() != slots.size()) throw ShapeError("adadelta: parameter list changed between steps");
  const double rho = cfg_.rho;
  const double eps = cfg_.epsilon;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    if (slot.value.size() != eg2_[i].size() || slot.grad.size() != slot.value.size()) {
      throw ShapeError("adadelta: slot '" + slot.name + "' changed size or lacks a gradient");
    }
    if (!slot.trainable) continue;
    auto& eg2 = eg2_[i];
    auto& edx2 = edx2_[i];
    for (std::size_t j = 0; j < slot.value.size(); ++j) {
      const double g = static_cast<double>(slot.grad[j]);
      eg2[j] = rho * eg2[j] + (1.0 - rho) * g * g;
      const double dx = -std::sqrt(edx2[j] + eps) / std::sqrt(eg2[j] + eps) * g;
      edx2[j] = rho * edx2[j] + (1.0 - rho) * dx * dx;
      slot.value[j] = static_cast<T>(static_cast<double>(slot.value[j]) + cfg_.learning_rate * dx);
    }
  }
  ++steps_;
}

template void Adadelta::step<float>(std::span<ParamSlot<float>>);
template void Adadelta::step<double>(std::span<ParamSlot<double>>);

}  // namespace anonet
