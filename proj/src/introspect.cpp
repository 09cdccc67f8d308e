#include "anonet/introspect.hpp"

#include <cmath>
#include <cstdio>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"

namespace anonet {

template <typename T>
NormMode introspection_mode(const BasicModel<T>& model) {
  for (const auto& l : model.layers()) {
    if (l.bn && !l.bn->running_initialized) return NormMode::training;
  }
  return NormMode::inference;
}

template NormMode introspection_mode(const BasicModel<float>&);
template NormMode introspection_mode(const BasicModel<double>&);

std::vector<Tensor<float>> intermediate_activations(const Model& model, const Tensor<float>& x,
                                                    std::optional<NormMode> mode) {
  if (x.shape().n != 1) throw ShapeError("introspection takes a single image, got batch " + x.shape().str());
  auto trace = model.forward_trace(x, mode.value_or(introspection_mode(model)));
  return std::move(trace.activations);
}

Tensor<float> layer_activation(const Model& model, const Tensor<float>& x, std::size_t layer,
                               std::optional<NormMode> mode) {
  if (layer >= model.layers().size()) {
    throw ConfigError("layer " + std::to_string(layer) + " out of range (model has " +
                      std::to_string(model.layers().size()) + ")");
  }
  return intermediate_activations(model, x, mode)[layer];
}

template <typename T>
std::pair<double, Tensor<T>> activation_objective(const BasicModel<T>& model, const Tensor<T>& x,
                                                  std::size_t layer, std::size_t filter,
                                                  NormMode mode) {
  if (layer >= model.layers().size()) throw ConfigError("layer " + std::to_string(layer) + " out of range");
  const std::size_t channels = model.layers()[layer].spec.out_channels;
  if (filter >= channels) {
    throw ConfigError("filter " + std::to_string(filter) + " out of range (layer " + std::to_string(layer) +
                      " has " + std::to_string(channels) + ")");
  }
  if (x.shape().n != 1) throw ShapeError("activation_objective takes a single image");
  const auto trace = model.forward_trace(x, mode);
  const auto& a = trace.activations[layer];
  const T* p = a.plane(0, filter);
  const std::size_t n = a.shape().plane();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += p[i];
  Tensor<T> g(a.shape());
  T* gp = g.plane(0, filter);
  for (std::size_t i = 0; i < n; ++i) gp[i] = T(1.0 / static_cast<double>(n));
  auto grads = model.backward(trace, g, true, layer);
  return {sum / static_cast<double>(n), std::move(grads.input)};
}

template std::pair<double, Tensor<float>> activation_objective(const BasicModel<float>&, const Tensor<float>&,
                                                               std::size_t, std::size_t, NormMode);
template std::pair<double, Tensor<double>> activation_objective(const BasicModel<double>&, const Tensor<double>&,
                                                                std::size_t, std::size_t, NormMode);

void ActMaxConfig::validate() const {
  if (steps < 1) throw ConfigError("activation maximization needs at least one step");
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (height < 1 || width < 1) throw ConfigError("stimulus size must be positive");
}

double ActMaxResult::monotone_fraction() const {
  if (trace.size() < 2) return 1.0;
  std::size_t ok = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) ok += trace[i] >= trace[i - 1];
  return static_cast<double>(ok) / static_cast<double>(trace.size() - 1);
}

std::string ActMaxResult::trace_csv() const {
  std::string out = "step,objective\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, trace[i]);
    out += buf;
  }
  return out;
}

namespace {

double l2(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

std::pair<double, double> mean_std(std::span<const float> v) {
  double m = 0.0;
  for (float x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - m) * (x - m);
  return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

ActMaxResult activation_maximization(const Model& model, const ActMaxConfig& cfg) {
  cfg.validate();
  if (cfg.layer >= model.layers().size()) throw ConfigError("layer " + std::to_string(cfg.layer) + " out of range");
  if (cfg.filter >= model.layers()[cfg.layer].spec.out_channels) {
    throw ConfigError("filter " + std::to_string(cfg.filter) + " out of range");
  }
  ActMaxResult res;
  res.mode = introspection_mode(model);
  const Shape4 shape{1, 1, cfg.height, cfg.width};

  Tensor<float> x;
  std::pair<double, Tensor<float>> obj;
  std::size_t attempt = 0;
  for (;; ++attempt) {
    res.seed_used = Rng::derive(cfg.seed, attempt);
    Rng rng(res.seed_used);
    x = Tensor<float>(shape);
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
    obj = activation_objective(model, x, cfg.layer, cfg.filter, res.mode);
    if (l2(obj.second.values()) > 0.0) break;
    if (attempt >= cfg.max_retries) {
      res.converged = false;
      res.retries = attempt;
      res.note = "zero gradient at the start after " + std::to_string(attempt + 1) + " seeds";
      res.image = x;
      res.trace = {obj.first};
      return res;
    }
  }
  res.retries = attempt;

  const auto [m0, s0] = mean_std(x.values());
  res.trace.push_back(obj.first);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const double norm = l2(obj.second.values());
    if (norm == 0.0) {
      res.trace.push_back(obj.first);
      continue;
    }
    const auto scale = static_cast<float>(cfg.step_size / norm);
    auto g = obj.second.values();
    auto xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += scale * g[i];
    if (cfg.standardize) {
      const auto [m, s] = mean_std(x.values());
      if (s > 0.0) {
        for (auto& v : xv) v = static_cast<float>((v - m) / s * s0 + m0);
      }
    }
    obj = activation_objective(model, x, cfg.layer, cfg.filter, res.mode);
    res.trace.push_back(obj.first);
    for (std::size_t s : cfg.snapshots) {
      if (s == step) res.snapshots.emplace_back(step, x);
    }
  }
  const std::size_t tail = std::max<std::size_t>(1, cfg.steps / 10);
  const double gain = res.trace.back() - res.trace[res.trace.size() - 1 - tail];
  if (gain < 1e-6) {
    res.converged = false;
    res.note = "objective improved by less than 1e-6 over the final " + std::to_string(tail) + " steps";
  }
  res.image = std::move(x);
  return res;
}

}  // namespace anonet
