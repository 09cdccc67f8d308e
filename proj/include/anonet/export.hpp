#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "anonet/core/tensor.hpp"
#include "anonet/data.hpp"
#include "anonet/filterbank.hpp"
#include "anonet/image.hpp"

namespace anonet {

/// Tiles every (C, H, W) plane of sample 0 into a grid, row-major in channel
/// order, `columns` tiles per row with a 1-pixel gap. Each tile is min-max
/// scaled to [0, 1] on its own (constant tiles become 0.5).
GrayImage tile_grid(const Tensor<float>& stack, std::size_t columns = 8, std::size_t upscale = 1);

/// Contact sheet of a filter bank, one kernel per tile.
GrayImage filter_contact_sheet(const FilterBank& bank, std::size_t columns = 12, std::size_t upscale = 4);

/// 255 where the score exceeds `threshold`, 0 elsewhere; plane (0, 0).
void write_score_mask(const std::filesystem::path& path, const Tensor<float>& scores,
                      double threshold = 0.0);
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace anonet
