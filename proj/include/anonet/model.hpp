#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "anonet/core/adadelta.hpp"
#include "anonet/core/batchnorm.hpp"
#include "anonet/core/conv.hpp"
#include "anonet/filterbank.hpp"
#include "anonet/model_config.hpp"

namespace anonet {

template <typename T>
struct ModelLayer {
  LayerSpec spec;
  ConvParams<T> conv;
  std::optional<BatchNormParams<T>> bn;
};

/// Everything backward needs from a forward pass.
template <typename T>
struct ForwardTrace {
  NormMode mode = NormMode::inference;
  Tensor<T> input;                     ///< after input normalization
  std::vector<Tensor<T>> conv_out;     ///< pre-normalization, kept only for BN layers
  std::vector<Tensor<T>> activations;  ///< per-layer outputs
  [[nodiscard]] const Tensor<T>& output() const { return activations.back(); }
};

template <typename T>
struct LayerGrads {
  Tensor<T> weight;  ///< zero for frozen layers
  std::vector<T> bias;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
struct ModelGrads {
  std::vector<LayerGrads<T>> layers;
  Tensor<T> input;  ///< empty unless requested
};

/// A materialized conv stack: every layer is conv -> [BN] -> activation.
template <typename T>
class BasicModel {
 public:
  BasicModel() = default;
  /// Initializes weights from the layer specs. Filter-bank layers are seeded
  /// from `bank` when given, otherwise from a freshly built normalized bank.
  BasicModel(ModelConfig cfg, std::uint64_t seed, const FilterBank* bank = nullptr);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<ModelLayer<T>>& layers() const { return layers_; }
  std::vector<ModelLayer<T>>& layers() { return layers_; }

  /// Pure forward; in training mode batch statistics are used but the
  /// running estimates are left alone.
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x, NormMode mode = NormMode::inference) const;
  /// Forward that keeps intermediate results. With `update_running` in
  /// training mode the BN running estimates absorb the batch statistics.
  ForwardTrace<T> forward_trace(const Tensor<T>& x, NormMode mode, bool update_running);
  [[nodiscard]] ForwardTrace<T> forward_trace(const Tensor<T>& x, NormMode mode) const;

  /// Backpropagates `grad_at` (gradient w.r.t. the activations of layer
  /// `from_layer`; the last layer when omitted) down to the input.
  [[nodiscard]] ModelGrads<T> backward(const ForwardTrace<T>& trace, const Tensor<T>& grad_at,
                                       bool want_input_grad = false,
                                       std::optional<std::size_t> from_layer = {}) const;

  /// Optimizer view: conv weight and bias (trainable per layer spec), then
  /// BN gamma and beta, in layer order. Gradients alias `grads`.
  std::vector<ParamSlot<T>> parameter_slots(const ModelGrads<T>& grads);

  /// Conv weights + biases + BN gamma/beta; running statistics excluded.
  [[nodiscard]] std::size_t count_parameters() const;
  [[nodiscard]] Shape4 output_shape(const Shape4& input) const;

  template <typename U>
  [[nodiscard]] BasicModel<U> cast() const {
    BasicModel<U> out;
    out.config_ = config_;
    for (const auto& l : layers_) {
      ModelLayer<U> m;
      m.spec = l.spec;
      m.conv.weight = l.conv.weight.template cast<U>();
      m.conv.bias.assign(l.conv.bias.begin(), l.conv.bias.end());
      m.conv.stride = l.conv.stride;
      m.conv.trainable = l.conv.trainable;
      if (l.bn) {
        BatchNormParams<U> b;
        b.gamma.assign(l.bn->gamma.begin(), l.bn->gamma.end());
        b.beta.assign(l.bn->beta.begin(), l.bn->beta.end());
        b.running_mean.assign(l.bn->running_mean.begin(), l.bn->running_mean.end());
        b.running_var.assign(l.bn->running_var.begin(), l.bn->running_var.end());
        b.epsilon = l.bn->epsilon;
        b.momentum = l.bn->momentum;
        b.running_initialized = l.bn->running_initialized;
        m.bn = std::move(b);
      }
      out.layers_.push_back(std::move(m));
    }
    return out;
  }

  /// Assembles a model from explicit layers (used by deserialization).
  static BasicModel from_layers(ModelConfig cfg, std::vector<ModelLayer<T>> layers);

 private:
  template <typename U>
  friend class BasicModel;

  ModelConfig config_;
  std::vector<ModelLayer<T>> layers_;
};

using Model = BasicModel<float>;

extern template class BasicModel<float>;
extern template class BasicModel<double>;

/// Filter-bank seeded network; `bank` must match the row's family and size.
Model build_anonet(const std::string& name, const FilterBank& bank, std::uint64_t seed);
Model build_ablation(const std::string& name, std::uint64_t seed);
Model build_baseline(std::uint64_t seed);
/// Any known configuration by name with default seeding.
Model build_model(const std::string& name, std::uint64_t seed);

std::size_t count_parameters(const Model& model);

}  // namespace anonet
