#pragma once

#include <filesystem>

#include "orbit/grid.hpp"

namespace orbit {

/// Binary PGM (P5, maxval 255). Image cells are quantized with
/// round(pixel * 255); mask cells are written as raw class indices.
void write_image_pgm(const std::filesystem::path& path, const Image& image);
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);

Image read_image_pgm(const std::filesystem::path& path);
Mask read_mask_pgm(const std::filesystem::path& path);

}  // namespace orbit
