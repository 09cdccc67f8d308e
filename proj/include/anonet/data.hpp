#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anonet/core/tensor.hpp"
#include "anonet/image.hpp"

namespace anonet {

/// Binary H x W mask, row-major; 1 marks an anomalous pixel.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), values(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  [[nodiscard]] std::size_t count() const;
  /// True when every set pixel of *this is also set in `other`.
  [[nodiscard]] bool subset_of(const Mask& other) const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

struct Sample {
  std::string id;
  GrayImage image;
  Mask mask;                      ///< training / evaluation label (weak)
  std::optional<Mask> tight_mask; ///< exact defect support when known
  bool defective = true;
};

struct Dataset {
  std::string name;
  std::vector<Sample> samples;
  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] bool empty() const { return samples.empty(); }
};

/// Morphological dilation with a k x k all-ones structuring element.
Mask dilate_mask(const Mask& mask, std::size_t k = 11);

/// A mask with the given size that is 1 wherever `m` has any set pixel in
/// the corresponding factor x factor block; output extents are ceil(H/f).
Mask downsample_mask(const Mask& m, std::size_t factor);

/// Anomaly -> +1, normal -> -1, as a (1, 1, H, W) tensor.
Tensor<float> encode_target(const Mask& mask);
/// Pixel is anomalous when its score exceeds `threshold`; reads plane (n, 0).
Mask decode_mask(const Tensor<float>& scores, double threshold = 0.0, std::size_t n = 0);

/// Builds a binary mask, throwing ConfigError for values outside {0, 1}.
Mask mask_from_values(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& values);

struct LoadOptions {
  /// Treat images without a mask file as defect-free (empty mask).
  bool allow_defect_free = false;
  /// When > 0, weak labels are made by dilating each mask with this window.
  std::size_t dilate = 0;
};

/// Loads `dir/images/*.{png,pgm}` with masks `dir/masks/<stem>.{png,pgm}`.
/// Masks are binarized at 0.5. Samples are ordered by file name.
Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& opts = {});

/// Writes the same layout as load_dataset reads (8-bit PNG); tight masks,
/// when present, go to `dir/tight_masks/`.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Deterministic split by shuffled sample order; validation gets
/// round(fraction * n) samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double validation_fraction,
                                          std::uint64_t seed);

enum class BatchMode {
  group_by_size,  ///< equal-sized images batched together, no resampling
  center_crop,    ///< every image cropped to the smallest extents present
};

struct Batch {
  std::vector<std::size_t> indices;  ///< into the dataset
  Tensor<float> images;              ///< (B, 1, H, W)
  std::vector<Mask> masks;           ///< cropped to match `images`
};

/// Order is a deterministic shuffle of (seed, epoch) unless `shuffle` is
/// false. The final partial batch of each size group is kept.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                std::uint64_t epoch = 0, bool shuffle = true,
                                BatchMode mode = BatchMode::group_by_size);

/// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace anonet
