#include "anonet/model.hpp"

#include "anonet/core/activation.hpp"
#include "anonet/core/errors.hpp"
#include "anonet/core/init.hpp"
#include "anonet/core/rng.hpp"

namespace anonet {

template <typename T>
BasicModel<T>::BasicModel(ModelConfig cfg, std::uint64_t seed, const FilterBank* bank)
    : config_(std::move(cfg)) {
  config_.validate();
  Rng rng(seed);
  std::size_t in_channels = 1;
  for (const auto& spec : config_.layers) {
    ModelLayer<T> layer;
    layer.spec = spec;
    layer.conv = ConvParams<T>(spec.out_channels, in_channels, spec.kernel, spec.stride,
                               spec.trainable);
    const Shape4 wshape = layer.conv.weight.shape();
    switch (spec.init) {
      case InitKind::he:
        layer.conv.weight = he_normal<T>(wshape, in_channels * spec.kernel * spec.kernel, rng);
        break;
      case InitKind::unit_normal:
        layer.conv.weight = unit_normal<T>(wshape, rng);
        break;
      case InitKind::filterbank: {
        FilterBank built;
        if (bank == nullptr) {
          built = build_bank(spec.family, spec.kernel);
          bank = &built;
        }
        if (bank->family != spec.family || bank->kernel_size != spec.kernel) {
          throw ConfigError("model '" + config_.name + "' expects a " + to_string(spec.family) +
                            " bank at " + std::to_string(spec.kernel) + "x" +
                            std::to_string(spec.kernel) + ", got " + to_string(bank->family) +
                            " at " + std::to_string(bank->kernel_size));
        }
        layer.conv.weight = bank->to_weights<T>();
        bank = nullptr;
        break;
      }
    }
    if (spec.batchnorm) layer.bn = BatchNormParams<T>(spec.out_channels);
    layers_.push_back(std::move(layer));
    in_channels = spec.out_channels;
  }
}

template <typename T>
BasicModel<T> BasicModel<T>::from_layers(ModelConfig cfg, std::vector<ModelLayer<T>> layers) {
  cfg.validate();
  if (cfg.layers.size() != layers.size()) throw ShapeError("layer count does not match config");
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    l.spec = cfg.layers[i];
    l.conv.stride = l.spec.stride;
    l.conv.trainable = l.spec.trainable;
    l.conv.validate();
    const auto& s = l.conv.weight.shape();
    if (s.n != l.spec.out_channels || s.c != in_channels || s.h != l.spec.kernel) {
      throw ShapeError("layer " + std::to_string(i) + " weights " + s.str() +
                       " disagree with its spec");
    }
    if (l.bn.has_value() != l.spec.batchnorm) throw ShapeError("batchnorm presence disagrees with spec");
    if (l.bn) {
      l.bn->validate();
      if (l.bn->channels() != s.n) throw ShapeError("batchnorm width disagrees with conv");
    }
    in_channels = s.n;
  }
  BasicModel m;
  m.config_ = std::move(cfg);
  m.layers_ = std::move(layers);
  return m;
}

namespace {

template <typename T>
void check_input(const Tensor<T>& x) {
  if (x.shape().c != 1) {
    throw ShapeError("model input must be single-channel, got " + std::to_string(x.shape().c) +
                     " channels");
  }
  if (x.shape().n == 0 || x.shape().h == 0 || x.shape().w == 0) throw ShapeError("empty model input");
}

// Removes each sample's mean; applied to inputs, and to input gradients
// (the map is a symmetric projection, so it is its own adjoint).
template <typename T>
void remove_plane_means(Tensor<T>& x) {
  const std::size_t n = x.shape().plane();
  for (std::size_t b = 0; b < x.shape().n; ++b) {
    T* p = x.plane(b, 0);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += p[i];
    const T mean = static_cast<T>(m / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) p[i] -= mean;
  }
}

}  // namespace

template <typename T>
Tensor<T> BasicModel<T>::forward(const Tensor<T>& x, NormMode mode) const {
  check_input(x);
  Tensor<T> cur = x;
  if (config_.input_norm == InputNorm::center) remove_plane_means(cur);
  for (const auto& l : layers_) {
    Tensor<T> z = conv2d_forward(cur, l.conv);
    if (l.bn) {
      BatchNormParams<T> bn = *l.bn;
      z = batchnorm_forward(z, bn, mode, false);
    }
    cur = activate(l.spec.activation, z);
  }
  return cur;
}

template <typename T>
ForwardTrace<T> BasicModel<T>::forward_trace(const Tensor<T>& x, NormMode mode,
                                             bool update_running) {
  check_input(x);
  ForwardTrace<T> t;
  t.mode = mode;
  t.input = x;
  if (config_.input_norm == InputNorm::center) remove_plane_means(t.input);
  const Tensor<T>* cur = &t.input;
  for (auto& l : layers_) {
    Tensor<T> z = conv2d_forward(*cur, l.conv);
    if (l.bn) {
      Tensor<T> y = batchnorm_forward(z, *l.bn, mode, update_running);
      t.conv_out.push_back(std::move(z));
      z = std::move(y);
    } else {
      t.conv_out.emplace_back();
    }
    t.activations.push_back(activate(l.spec.activation, z));
    cur = &t.activations.back();
  }
  return t;
}

template <typename T>
ForwardTrace<T> BasicModel<T>::forward_trace(const Tensor<T>& x, NormMode mode) const {
  BasicModel copy = *this;
  return copy.forward_trace(x, mode, false);
}

template <typename T>
ModelGrads<T> BasicModel<T>::backward(const ForwardTrace<T>& trace, const Tensor<T>& grad_at,
                                      bool want_input_grad,
                                      std::optional<std::size_t> from_layer) const {
  const std::size_t top = from_layer.value_or(layers_.size() - 1);
  if (top >= layers_.size() || trace.activations.size() != layers_.size()) {
    throw ShapeError("backward: layer index out of range or trace does not match model");
  }
  if (grad_at.shape() != trace.activations[top].shape()) {
    throw ShapeError("backward: gradient shape " + grad_at.shape().str() + " vs activation " +
                     trace.activations[top].shape().str());
  }
  ModelGrads<T> grads;
  grads.layers.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& g = grads.layers[i];
    g.weight = Tensor<T>(l.conv.weight.shape());
    g.bias.assign(l.conv.bias.size(), T(0));
    if (l.bn) {
      g.gamma.assign(l.bn->channels(), T(0));
      g.beta.assign(l.bn->channels(), T(0));
    }
  }
  Tensor<T> g = grad_at;
  for (std::size_t step = 0; step <= top; ++step) {
    const std::size_t i = top - step;
    const auto& l = layers_[i];
    g = activate_backward(l.spec.activation, trace.activations[i], g);
    if (l.bn) {
      auto bg = batchnorm_backward(trace.conv_out[i], *l.bn, g, trace.mode);
      grads.layers[i].gamma = std::move(bg.gamma);
      grads.layers[i].beta = std::move(bg.beta);
      g = std::move(bg.input);
    }
    const Tensor<T>& input = i == 0 ? trace.input : trace.activations[i - 1];
    ConvGradRequest want{i > 0 || want_input_grad, l.conv.trainable};
    if (!want.input && !want.params) break;
    auto cg = conv2d_backward(input, l.conv, g, want);
    if (want.params) {
      grads.layers[i].weight = std::move(cg.weight);
      grads.layers[i].bias = std::move(cg.bias);
    }
    if (want.input) {
      g = std::move(cg.input);
      if (i == 0) {
        if (config_.input_norm == InputNorm::center) remove_plane_means(g);
        grads.input = g;
      }
    }
  }
  return grads;
}

template <typename T>
std::vector<ParamSlot<T>> BasicModel<T>::parameter_slots(const ModelGrads<T>& grads) {
  if (grads.layers.size() != layers_.size()) throw ShapeError("gradients do not match model");
  std::vector<ParamSlot<T>> slots;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const auto& g = grads.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    slots.push_back({p + "weight", l.conv.weight.values(), g.weight.values(), l.conv.trainable});
    slots.push_back({p + "bias", l.conv.bias, g.bias, l.conv.trainable});
    if (l.bn) {
      slots.push_back({p + "gamma", l.bn->gamma, g.gamma, true});
      slots.push_back({p + "beta", l.bn->beta, g.beta, true});
    }
  }
  return slots;
}

template <typename T>
std::size_t BasicModel<T>::count_parameters() const {
  std::size_t total = 0;
  for (const auto& l : layers_) {
    total += l.conv.weight.size() + l.conv.bias.size();
    if (l.bn) total += 2 * l.bn->channels();
  }
  return total;
}

template <typename T>
Shape4 BasicModel<T>::output_shape(const Shape4& input) const {
  Shape4 s = input;
  for (const auto& l : layers_) s = conv2d_output_shape(s, l.conv);
  return s;
}

template class BasicModel<float>;
template class BasicModel<double>;

Model build_anonet(const std::string& name, const FilterBank& bank, std::uint64_t seed) {
  return Model(anonet_config(name), seed, &bank);
}

Model build_ablation(const std::string& name, std::uint64_t seed) {
  return Model(ablation_config(name), seed);
}

Model build_baseline(std::uint64_t seed) { return Model(baseline_config(), seed); }

Model build_model(const std::string& name, std::uint64_t seed) {
  return Model(config_by_name(name), seed);
}

std::size_t count_parameters(const Model& model) { return model.count_parameters(); }

}  // namespace anonet
