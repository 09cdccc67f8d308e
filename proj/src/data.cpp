#include "anonet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "anonet/core/errors.hpp"
#include "anonet/core/rng.hpp"

namespace anonet {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

bool Mask::subset_of(const Mask& other) const {
  if (height != other.height || width != other.width) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] && !other.values[i]) return false;
  }
  return true;
}

namespace {

void check_binary(const Mask& m) {
  if (m.values.size() != m.height * m.width) throw ShapeError("mask buffer size mismatch");
  for (auto v : m.values) {
    if (v > 1) throw ConfigError("mask is not binary (found value " + std::to_string(v) + ")");
  }
}

}  // namespace

Mask mask_from_values(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& values) {
  Mask m;
  m.height = h;
  m.width = w;
  m.values = values;
  check_binary(m);
  return m;
}

Mask dilate_mask(const Mask& mask, std::size_t k) {
  if (k % 2 == 0) throw ConfigError("dilation window must be odd, got " + std::to_string(k));
  check_binary(mask);
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(mask.height);
  const auto W = static_cast<std::ptrdiff_t>(mask.width);
  // A square window is separable: horizontal max, then vertical max.
  Mask rows(mask.height, mask.width);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      std::uint8_t v = 0;
      for (std::ptrdiff_t dx = -r; dx <= r && !v; ++dx) {
        const auto xx = x + dx;
        if (xx >= 0 && xx < W) v = mask.values[static_cast<std::size_t>(y * W + xx)];
      }
      rows.values[static_cast<std::size_t>(y * W + x)] = v;
    }
  }
  Mask out(mask.height, mask.width);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      std::uint8_t v = 0;
      for (std::ptrdiff_t dy = -r; dy <= r && !v; ++dy) {
        const auto yy = y + dy;
        if (yy >= 0 && yy < H) v = rows.values[static_cast<std::size_t>(yy * W + x)];
      }
      out.values[static_cast<std::size_t>(y * W + x)] = v;
    }
  }
  return out;
}

Mask downsample_mask(const Mask& m, std::size_t factor) {
  if (factor == 0) throw ConfigError("downsample factor must be positive");
  if (factor == 1) return m;
  const std::size_t h = (m.height + factor - 1) / factor;
  const std::size_t w = (m.width + factor - 1) / factor;
  Mask out(h, w);
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (m.at(y, x)) out.at(y / factor, x / factor) = 1;
    }
  }
  return out;
}

Tensor<float> encode_target(const Mask& mask) {
  check_binary(mask);
  Tensor<float> t({1, 1, mask.height, mask.width});
  for (std::size_t i = 0; i < mask.values.size(); ++i) t[i] = mask.values[i] ? 1.0f : -1.0f;
  return t;
}

Mask decode_mask(const Tensor<float>& scores, double threshold, std::size_t n) {
  const auto& s = scores.shape();
  if (n >= s.n || s.c < 1) throw ShapeError("decode_mask: no such plane");
  Mask m(s.h, s.w);
  const float* p = scores.plane(n, 0);
  for (std::size_t i = 0; i < s.plane(); ++i) m.values[i] = p[i] > threshold ? 1 : 0;
  return m;
}

Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& opts) {
  namespace fs = std::filesystem;
  const fs::path images = dir / "images";
  const fs::path masks = dir / "masks";
  if (!fs::is_directory(images)) throw FormatError("'" + images.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, fs::path> mask_files;
  if (fs::is_directory(masks)) {
    for (const auto& e : fs::directory_iterator(masks)) {
      if (e.is_regular_file() && is_image_file(e.path())) {
        mask_files[e.path().stem().string()] = e.path();
      }
    }
  }
  Dataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  for (const auto& f : files) {
    Sample s;
    s.id = f.stem().string();
    s.image = read_image(f);
    const auto it = mask_files.find(s.id);
    if (it == mask_files.end()) {
      if (!opts.allow_defect_free) {
        throw FormatError("image '" + f.string() + "' has no mask and defect-free images are not allowed");
      }
      s.mask = Mask(s.image.height, s.image.width);
      s.defective = false;
    } else {
      const GrayImage m = read_image(it->second);
      if (m.height != s.image.height || m.width != s.image.width) {
        throw ShapeError("mask '" + it->second.string() + "' is " + std::to_string(m.height) + "x" +
                         std::to_string(m.width) + " but its image is " +
                         std::to_string(s.image.height) + "x" + std::to_string(s.image.width));
      }
      s.mask = Mask(m.height, m.width);
      for (std::size_t i = 0; i < m.pixels.size(); ++i) s.mask.values[i] = m.pixels[i] >= 0.5f ? 1 : 0;
      s.defective = s.mask.count() > 0;
      if (opts.dilate > 0) {
        s.tight_mask = s.mask;
        s.mask = dilate_mask(s.mask, opts.dilate);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  const fs::path tight = dir / "tight_masks";
  if (fs::is_directory(tight) && opts.dilate == 0) {
    for (auto& s : ds.samples) {
      for (const char* ext : {".png", ".pgm"}) {
        const fs::path p = tight / (s.id + ext);
        if (!fs::exists(p)) continue;
        const GrayImage m = read_image(p);
        if (m.height != s.mask.height || m.width != s.mask.width) throw ShapeError("tight mask size mismatch");
        Mask t(m.height, m.width);
        for (std::size_t i = 0; i < m.pixels.size(); ++i) t.values[i] = m.pixels[i] >= 0.5f ? 1 : 0;
        s.tight_mask = std::move(t);
        break;
      }
    }
  }
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  auto mask_bytes = [](const Mask& m) {
    std::vector<std::uint8_t> b(m.values.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = m.values[i] ? 255 : 0;
    return b;
  };
  for (const auto& s : ds.samples) {
    write_image(dir / "images" / (s.id + ".png"), s.image);
    if (s.defective || s.mask.count() > 0) {
      write_gray8(dir / "masks" / (s.id + ".png"), s.mask.height, s.mask.width, mask_bytes(s.mask));
    }
    if (s.tight_mask) {
      write_gray8(dir / "tight_masks" / (s.id + ".png"), s.tight_mask->height, s.tight_mask->width,
                  mask_bytes(*s.tight_mask));
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double validation_fraction,
                                          std::uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }
  const auto order = shuffled_indices(ds.size(), seed);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(ds.size())));
  Dataset train{ds.name, {}};
  Dataset val{ds.name, {}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).samples.push_back(ds.samples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                std::uint64_t epoch, bool shuffle, BatchMode mode) {
  if (ds.empty()) throw ConfigError("cannot batch an empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order;
  if (shuffle) {
    order = shuffled_indices(ds.size(), Rng::derive(seed, epoch));
  } else {
    order.resize(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  }

  std::size_t crop_h = SIZE_MAX, crop_w = SIZE_MAX;
  if (mode == BatchMode::center_crop) {
    for (const auto& s : ds.samples) {
      crop_h = std::min(crop_h, s.image.height);
      crop_w = std::min(crop_w, s.image.width);
    }
  }
  // Size groups in order of first appearance.
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i : order) {
    const auto& img = ds.samples[i].image;
    const auto key = mode == BatchMode::center_crop ? std::make_pair(crop_h, crop_w)
                                                    : std::make_pair(img.height, img.width);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.emplace_back();
      it = keys.end() - 1;
    }
    groups[static_cast<std::size_t>(it - keys.begin())].push_back(i);
  }

  std::vector<Batch> batches;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto [h, w] = keys[g];
    const auto& members = groups[g];
    for (std::size_t start = 0; start < members.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, members.size() - start);
      Batch b;
      b.images = Tensor<float>({count, 1, h, w});
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t idx = members[start + j];
        const Sample& s = ds.samples[idx];
        if (s.mask.height != s.image.height || s.mask.width != s.image.width) {
          throw ShapeError("sample '" + s.id + "' mask and image sizes differ");
        }
        const std::size_t oy = (s.image.height - h) / 2;
        const std::size_t ox = (s.image.width - w) / 2;
        Mask m(h, w);
        float* dst = b.images.plane(j, 0);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            dst[y * w + x] = s.image.at(y + oy, x + ox);
            m.at(y, x) = s.mask.at(y + oy, x + ox);
          }
        }
        b.indices.push_back(idx);
        b.masks.push_back(std::move(m));
      }
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

}  // namespace anonet
