#include "anonet/export.hpp"

#include <algorithm>

#include "anonet/core/errors.hpp"

namespace anonet {

GrayImage tile_grid(const Tensor<float>& stack, std::size_t columns, std::size_t upscale) {
  const auto& s = stack.shape();
  if (s.n < 1 || s.c < 1) throw ShapeError("tile_grid: empty stack " + s.str());
  if (columns == 0 || upscale == 0) throw ConfigError("tile_grid: columns and upscale must be positive");
  columns = std::min(columns, s.c);
  const std::size_t rows = (s.c + columns - 1) / columns;
  const std::size_t th = s.h * upscale, tw = s.w * upscale;
  GrayImage img(rows * (th + 1) - 1, columns * (tw + 1) - 1, 1.0f);
  for (std::size_t c = 0; c < s.c; ++c) {
    const float* p = stack.plane(0, c);
    const auto [lo, hi] = std::minmax_element(p, p + s.plane());
    const float range = *hi - *lo;
    const std::size_t oy = (c / columns) * (th + 1), ox = (c % columns) * (tw + 1);
    for (std::size_t y = 0; y < th; ++y) {
      for (std::size_t x = 0; x < tw; ++x) {
        const float v = p[(y / upscale) * s.w + x / upscale];
        img.at(oy + y, ox + x) = range > 0.0f ? (v - *lo) / range : 0.5f;
      }
    }
  }
  return img;
}

GrayImage filter_contact_sheet(const FilterBank& bank, std::size_t columns, std::size_t upscale) {
  // Weights are (n, 1, k, k); view them as one sample with n channels.
  const auto w = bank.to_weights<float>();
  const auto& s = w.shape();
  Tensor<float> stack({1, s.n, s.h, s.w}, std::vector<float>(w.values().begin(), w.values().end()));
  return tile_grid(stack, columns, upscale);
}

void write_score_mask(const std::filesystem::path& path, const Tensor<float>& scores, double threshold) {
  write_mask(path, decode_mask(scores, threshold, 0));
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.values[i] ? 255 : 0;
  write_gray8(path, mask.height, mask.width, bytes);
}

}  // namespace anonet
