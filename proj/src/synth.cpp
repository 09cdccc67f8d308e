#include "anonet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"

namespace anonet {

void SynthSpec::validate() const {
  if (count == 0) throw ConfigError("synth: count must be positive");
  if (height < 8 || width < 8) throw ConfigError("synth: images must be at least 8x8");
  if (octaves == 0 || base_period < 1.0) throw ConfigError("synth: need at least one octave of period >= 1");
  if (!(persistence > 0.0) || blur_sigma < 0.0) throw ConfigError("synth: bad texture parameters");
  if (!(background_std > 0.0)) throw ConfigError("synth: background_std must be positive");
  if (!(axis_min > 0.0) || axis_max < axis_min) throw ConfigError("synth: bad axis range");
  if (2.0 * axis_max + 2.0 > static_cast<double>(std::min(height, width))) {
    throw ConfigError("synth: defects of axis " + std::to_string(axis_max) + " do not fit the image");
  }
  if (!(delta_min > 0.0) || delta_max < delta_min) throw ConfigError("synth: bad delta range");
  if (!(core > 0.0 && core < 1.0)) throw ConfigError("synth: core must lie in (0, 1)");
  if (weak_scale < 1.0) throw ConfigError("synth: weak_scale must be >= 1 so the weak label covers the defect");
  if (defect_free_fraction < 0.0 || defect_free_fraction > 1.0) {
    throw ConfigError("synth: defect_free_fraction must be in [0, 1]");
  }
}

namespace {

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

std::vector<double> value_noise(Rng& rng, std::size_t h, std::size_t w, double period) {
  const auto gh = static_cast<std::size_t>(std::ceil(static_cast<double>(h) / period)) + 2;
  const auto gw = static_cast<std::size_t>(std::ceil(static_cast<double>(w) / period)) + 2;
  std::vector<double> lattice(gh * gw);
  for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / period;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = smooth(fy - static_cast<double>(y0));
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / period;
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = smooth(fx - static_cast<double>(x0));
      const double a = lattice[y0 * gw + x0], b = lattice[y0 * gw + x0 + 1];
      const double c = lattice[(y0 + 1) * gw + x0], d = lattice[(y0 + 1) * gw + x0 + 1];
      out[y * w + x] = (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
    }
  }
  return out;
}

void gaussian_blur(std::vector<double>& img, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return;
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : k) v /= sum;
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  std::vector<double> tmp(img.size());
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * img[static_cast<std::size_t>(y * W + reflect(x + i, W))];
      }
      tmp[static_cast<std::size_t>(y * W + x)] = acc;
    }
  }
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(reflect(y + i, H) * W + x)];
      }
      img[static_cast<std::size_t>(y * W + x)] = acc;
    }
  }
}

std::vector<double> background(Rng& rng, const SynthSpec& s) {
  std::vector<double> img(s.height * s.width, 0.0);
  double amp = 1.0;
  double period = s.base_period;
  for (std::size_t o = 0; o < s.octaves; ++o) {
    const auto layer = value_noise(rng, s.height, s.width, std::max(period, 1.0));
    for (std::size_t i = 0; i < img.size(); ++i) img[i] += amp * layer[i];
    amp *= s.persistence;
    period /= 2.0;
  }
  gaussian_blur(img, s.height, s.width, s.blur_sigma);
  double mean = 0.0;
  for (double v : img) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0.0;
  for (double v : img) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(img.size()));
  const double scale = sd > 0.0 ? s.background_std / sd : 0.0;
  for (double& v : img) v = s.background_mean + (v - mean) * scale;
  return img;
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthResult res;
  res.dataset.name = spec.name;
  const std::size_t H = spec.height, W = spec.width;
  const auto n_clean = static_cast<std::size_t>(std::llround(spec.defect_free_fraction * static_cast<double>(spec.count)));
  for (std::size_t i = 0; i < spec.count; ++i) {
    SynthRecord rec;
    rec.seed = Rng::derive(spec.seed, i);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    rec.id = buf;
    rec.defective = i >= n_clean;
    Rng rng(rec.seed);
    const auto bg = background(rng, spec);

    Sample s;
    s.id = rec.id;
    s.image = GrayImage(H, W);
    s.mask = Mask(H, W);
    s.defective = rec.defective;
    if (!rec.defective) {
      for (std::size_t p = 0; p < bg.size(); ++p) s.image.pixels[p] = static_cast<float>(std::clamp(bg[p], 0.0, 1.0));
      s.tight_mask = Mask(H, W);
      res.dataset.samples.push_back(std::move(s));
      res.records.push_back(rec);
      continue;
    }

    for (int attempt = 0;; ++attempt) {
      if (attempt == 64) throw NumericError("synth: could not reach the minimum contrast for sample " + rec.id);
      rec.axis_a = rng.uniform(spec.axis_min, spec.axis_max);
      rec.axis_b = rng.uniform(spec.axis_min, spec.axis_max);
      rec.angle = rng.uniform(0.0, std::numbers::pi);
      rec.delta = rng.uniform(spec.delta_min, spec.delta_max);
      // Bounding half-extents of the rotated ellipse.
      const double ca = std::cos(rec.angle), sa = std::sin(rec.angle);
      const double ey = std::sqrt(std::pow(rec.axis_a * sa, 2) + std::pow(rec.axis_b * ca, 2));
      const double ex = std::sqrt(std::pow(rec.axis_a * ca, 2) + std::pow(rec.axis_b * sa, 2));
      rec.center_y = rng.uniform(ey + 1.0, static_cast<double>(H) - 2.0 - ey);
      rec.center_x = rng.uniform(ex + 1.0, static_cast<double>(W) - 2.0 - ex);

      Mask tight(H, W), weak(H, W);
      std::vector<float> px(H * W);
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const double dy = static_cast<double>(y) - rec.center_y;
          const double dx = static_cast<double>(x) - rec.center_x;
          const double u = (dx * ca + dy * sa) / rec.axis_a;
          const double v = (-dx * sa + dy * ca) / rec.axis_b;
          const double r = std::sqrt(u * u + v * v);
          double depth = 0.0;
          if (r <= spec.core) {
            depth = 1.0;
          } else if (r < 1.0) {
            depth = 0.5 * (1.0 + std::cos(std::numbers::pi * (r - spec.core) / (1.0 - spec.core)));
          }
          const std::size_t p = y * W + x;
          px[p] = static_cast<float>(std::clamp(bg[p] - rec.delta * depth, 0.0, 1.0));
          tight.values[p] = r <= spec.core ? 1 : 0;
          weak.values[p] = r <= spec.weak_scale ? 1 : 0;
        }
      }
      double in_sum = 0.0, out_sum = 0.0;
      std::size_t in_n = 0, out_n = 0;
      for (std::size_t p = 0; p < px.size(); ++p) {
        if (tight.values[p]) {
          in_sum += px[p];
          ++in_n;
        } else if (!weak.values[p]) {
          out_sum += px[p];
          ++out_n;
        }
      }
      if (in_n == 0 || out_n == 0) continue;
      rec.contrast = out_sum / static_cast<double>(out_n) - in_sum / static_cast<double>(in_n);
      if (rec.contrast < spec.delta_min) continue;
      s.image.pixels = std::move(px);
      s.mask = std::move(weak);
      s.tight_mask = std::move(tight);
      break;
    }
    res.dataset.samples.push_back(std::move(s));
    res.records.push_back(rec);
  }
  return res;
}

std::string manifest_jsonl(const SynthSpec& spec, const std::vector<SynthRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["defective"] = r.defective;
    j["seed"] = r.seed;
    j["dataset_seed"] = spec.seed;
    if (r.defective) {
      j["center"] = {r.center_y, r.center_x};
      j["axes"] = {r.axis_a, r.axis_b};
      j["angle"] = r.angle;
      j["delta"] = r.delta;
      j["contrast"] = r.contrast;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthResult& r) {
  save_dataset(dir, r.dataset);
  std::ofstream f(dir / "manifest.jsonl", std::ios::binary);
  if (!f) throw FormatError("cannot write '" + (dir / "manifest.jsonl").string() + "'");
  f << manifest_jsonl(spec, r.records);
}

}  // namespace anonet
