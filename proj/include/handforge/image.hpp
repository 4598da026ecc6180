#pragma once

#include "handforge/types.hpp"

namespace handforge {

/// Linear-light RGB image, one H x W plane per channel, values in [0, 1].
struct ImageRGB {
  Grid r, g, b;

  int width() const { return static_cast<int>(r.cols()); }
  int height() const { return static_cast<int>(r.rows()); }

  static ImageRGB constant(int width, int height, const Vec3& rgb) {
    ImageRGB img;
    img.r = Grid::Constant(height, width, rgb.x());
    img.g = Grid::Constant(height, width, rgb.y());
    img.b = Grid::Constant(height, width, rgb.z());
    return img;
  }

  static ImageRGB zeros(int width, int height) {
    return constant(width, height, Vec3::Zero());
  }

  Vec3 pixel(int x, int y) const { return Vec3(r(y, x), g(y, x), b(y, x)); }

  void set_pixel(int x, int y, const Vec3& rgb) {
    r(y, x) = rgb.x();
    g(y, x) = rgb.y();
    b(y, x) = rgb.z();
  }
};

/// Bilinear resize with pixel-center sampling.
ImageRGB resize_bilinear(const ImageRGB& src, int width, int height);

/// Nearest-neighbor mask resize.
MaskImage resize_mask(const MaskImage& src, int width, int height);

ImageRGB flip_horizontal(const ImageRGB& src);
MaskImage flip_horizontal(const MaskImage& src);

}  // namespace handforge
