#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace anonet {

/// Single-channel image with intensities in [0, 1], row-major.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, float fill = 0.0f)
      : height(h), width(w), pixels(h * w, fill) {}

  float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

/// Reads 8/16-bit PNG (any color type) or binary/ASCII PGM. Color is reduced
/// to the unweighted average of its channels; alpha is ignored.
GrayImage read_image(const std::filesystem::path& path);

/// Writes 8-bit grayscale; the format follows the extension (.png or .pgm).
/// Values are clamped to [0, 1] and rounded to the nearest of 256 levels.
void write_image(const std::filesystem::path& path, const GrayImage& img);

/// Raw 8-bit variant of write_image.
void write_gray8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                 const std::vector<std::uint8_t>& bytes);

bool is_image_file(const std::filesystem::path& path);

}  // namespace anonet
