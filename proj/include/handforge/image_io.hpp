#pragma once

#include <string>

#include "handforge/image.hpp"

namespace handforge {

/// 8-bit RGB PNG, decoded to linear light assuming gamma 2.2.
ImageRGB read_png_rgb(const std::string& path);

/// 8-bit RGB PNG, encoded from linear light with gamma 1/2.2.
void write_png_rgb(const std::string& path, const ImageRGB& image);

/// 8-bit grayscale PNG as a binary mask (>= 128 reads as 1).
MaskImage read_png_mask(const std::string& path);
void write_png_mask(const std::string& path, const MaskImage& mask);

/// 8-bit grayscale PNG of a [0, 1] grid, no gamma (debug heatmap channels).
void write_png_gray(const std::string& path, const Grid& values);

}  // namespace handforge
