#include "anonet/train.hpp"

#include <cmath>
#include <cstdio>

#include "anonet/core/errors.hpp"
#include "anonet/serialize.hpp"

namespace anonet {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(adadelta.rho > 0.0 && adadelta.rho < 1.0)) throw ConfigError("adadelta rho must lie in (0, 1)");
  if (!(adadelta.epsilon > 0.0)) throw ConfigError("adadelta epsilon must be positive");
  if (!(adadelta.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) throw ConfigError("checkpoint_every needs a checkpoint directory");
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,loss,f1,auroc\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,", e.epoch, e.loss);
    out += buf;
    if (e.validation) {
      std::snprintf(buf, sizeof buf, "%.17g,", e.validation->f1);
      out += buf;
      if (e.validation->auroc) {
        std::snprintf(buf, sizeof buf, "%.17g", *e.validation->auroc);
        out += buf;
      }
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

void apply_freeze(Model& model, const TrainConfig& cfg) {
  if (!cfg.freeze_filters) return;
  auto& layers = model.layers();
  if (layers.empty() || layers[0].spec.init != InitKind::filterbank) return;
  layers[0].spec.trainable = !*cfg.freeze_filters;
  layers[0].conv.trainable = !*cfg.freeze_filters;
}

Mask target_mask(const Model& model, const Mask& full) {
  return downsample_mask(full, model.config().total_stride());
}

LossResult<float> training_loss(LossKind kind, const Tensor<float>& pred, const Tensor<float>& target) {
  if (kind == LossKind::mse) return mse_loss(pred, target);
  Tensor<float> p(pred.shape()), t(target.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[i] = 0.5f * (pred[i] + 1.0f);
    t[i] = target[i] > 0.0f ? 1.0f : 0.0f;
  }
  auto r = cross_entropy_loss(p, t);
  for (auto& g : r.grad.values()) g *= 0.5f;
  return r;
}

namespace {

Tensor<float> batch_targets(const Model& model, const Batch& b) {
  const Shape4 out = model.output_shape(b.images.shape());
  Tensor<float> t({b.masks.size(), 1, out.h, out.w});
  for (std::size_t i = 0; i < b.masks.size(); ++i) {
    const Mask m = target_mask(model, b.masks[i]);
    if (m.height != out.h || m.width != out.w) throw ShapeError("target does not match the output size");
    const auto enc = encode_target(m);
    std::copy(enc.values().begin(), enc.values().end(), t.plane(i, 0));
  }
  return t;
}

bool finite_params(const Model& m) {
  for (const auto& l : m.layers()) {
    if (!l.conv.weight.all_finite()) return false;
    for (float v : l.conv.bias) if (!std::isfinite(v)) return false;
    if (l.bn) {
      for (float v : l.bn->gamma) if (!std::isfinite(v)) return false;
      for (float v : l.bn->beta) if (!std::isfinite(v)) return false;
      for (float v : l.bn->running_mean) if (!std::isfinite(v)) return false;
      for (float v : l.bn->running_var) if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

double dataset_loss(const Model& model, const Dataset& ds, const TrainConfig& cfg) {
  const auto batches = make_batches(ds, cfg.batch, cfg.seed, 0, false, cfg.batch_mode);
  double sum = 0.0;
  for (const auto& b : batches) {
    const auto pred = model.forward(b.images, NormMode::training);
    sum += training_loss(cfg.loss, pred, batch_targets(model, b)).value;
  }
  return sum / static_cast<double>(batches.size());
}

void recalibrate_batchnorm(Model& model, const Dataset& ds, const TrainConfig& cfg) {
  const auto batches = make_batches(ds, cfg.batch, cfg.seed, 0, false, cfg.batch_mode);
  const std::size_t L = model.layers().size();
  std::vector<std::vector<double>> mean(L), var(L);
  for (const auto& b : batches) {
    const auto trace = model.forward_trace(b.images, NormMode::training);
    for (std::size_t l = 0; l < L; ++l) {
      if (!model.layers()[l].bn) continue;
      const auto& z = trace.conv_out[l];
      const auto& s = z.shape();
      const double count = static_cast<double>(s.n * s.plane());
      mean[l].resize(s.c, 0.0);
      var[l].resize(s.c, 0.0);
      for (std::size_t c = 0; c < s.c; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
          const float* p = z.plane(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
        }
        const double m = sum / count;
        for (std::size_t n = 0; n < s.n; ++n) {
          const float* p = z.plane(n, c);
          for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - m) * (p[i] - m);
        }
        mean[l][c] += m * count;
        var[l][c] += sq;
      }
    }
  }
  // Means and variances are pooled with per-batch element counts as weights.
  for (std::size_t l = 0; l < L; ++l) {
    auto& bn = model.layers()[l].bn;
    if (!bn) continue;
    double total = 0.0;
    for (const auto& b : batches) {
      Shape4 s = b.images.shape();
      for (std::size_t j = 0; j <= l; ++j) s = conv2d_output_shape(s, model.layers()[j].conv);
      total += static_cast<double>(s.n * s.plane());
    }
    for (std::size_t c = 0; c < bn->channels(); ++c) {
      bn->running_mean[c] = static_cast<float>(mean[l][c] / total);
      bn->running_var[c] = static_cast<float>(var[l][c] / total);
    }
    bn->running_initialized = true;
  }
}

MetricsReport validate(const Model& model, const Dataset& ds, double threshold, Pooling pooling) {
  if (ds.empty()) throw ConfigError("validation set is empty");
  MetricsReport rep;
  rep.dataset = ds.name;
  rep.parameters = model.count_parameters();
  rep.threshold = threshold;
  rep.pooling = pooling;
  RocAccumulator pooled;
  ConfusionCounts total;
  double f1_sum = 0.0, p_sum = 0.0, r_sum = 0.0, au_sum = 0.0;
  std::size_t au_n = 0;
  for (const auto& s : ds.samples) {
    Tensor<float> x({1, 1, s.image.height, s.image.width}, s.image.pixels);
    const auto y = model.forward(x, NormMode::inference);
    const Mask truth = target_mask(model, s.mask);
    if (truth.values.size() != y.size()) throw ShapeError("mask does not match the output of sample '" + s.id + "'");
    const auto c = confusion(y.values(), truth.values, threshold);
    total += c;
    if (pooling == Pooling::pooled) {
      pooled.add(y.values(), truth.values);
    } else {
      const auto f = f1_from_counts(c);
      f1_sum += f.f1;
      p_sum += f.precision;
      r_sum += f.recall;
      if (const auto a = auroc(y.values(), truth.values)) {
        au_sum += *a;
        ++au_n;
      }
    }
  }
  rep.counts = total;
  if (pooling == Pooling::pooled) {
    const auto f = f1_from_counts(total);
    rep.f1 = f.f1;
    rep.precision = f.precision;
    rep.recall = f.recall;
    rep.f1_degenerate = f.degenerate;
    rep.auroc = pooled.value();
  } else {
    const auto n = static_cast<double>(ds.size());
    rep.f1 = f1_sum / n;
    rep.precision = p_sum / n;
    rep.recall = r_sum / n;
    rep.f1_degenerate = f1_from_counts(total).degenerate;
    if (au_n > 0) rep.auroc = au_sum / static_cast<double>(au_n);
  }
  return rep;
}

TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val,
                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  apply_freeze(model, cfg);
  if (cfg.checkpoint_every > 0) std::filesystem::create_directories(cfg.checkpoint_dir);

  TrainHistory hist;
  hist.initial_loss = dataset_loss(model, train_set, cfg);
  Adadelta opt(cfg.adadelta);
  Model last_good = model;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = make_batches(train_set, cfg.batch, cfg.seed, epoch, cfg.shuffle, cfg.batch_mode);
    EpochRecord rec;
    rec.epoch = epoch;
    double sum = 0.0;
    for (const auto& b : batches) {
      auto trace = model.forward_trace(b.images, NormMode::training, true);
      const auto lr = training_loss(cfg.loss, trace.output(), batch_targets(model, b));
      if (!std::isfinite(lr.value)) {
        model = last_good;
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(rec.steps + 1) + "; weights restored to epoch " +
                           std::to_string(epoch - 1));
      }
      const auto grads = model.backward(trace, lr.grad);
      auto slots = model.parameter_slots(grads);
      opt.step(std::span<ParamSlot<float>>(slots));
      if (!finite_params(model)) {
        model = last_good;
        throw NumericError("non-finite parameters at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(rec.steps + 1) + "; weights restored to epoch " +
                           std::to_string(epoch - 1));
      }
      sum += lr.value;
      ++rec.steps;
    }
    rec.loss = sum / static_cast<double>(rec.steps);
    hist.steps += rec.steps;
    if (cfg.recalibrate_bn) recalibrate_batchnorm(model, train_set, cfg);
    if (!val.empty()) {
      rec.validation = validate(model, val, cfg.threshold, cfg.pooling);
      rec.validation->epoch = epoch;
    }
    last_good = model;
    if (cfg.checkpoint_every > 0 && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs)) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.anw", epoch);
      save_weights(model, cfg.checkpoint_dir / name);
    }
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  hist.final_loss = dataset_loss(model, train_set, cfg);
  return hist;
}

}  // namespace anonet
