#include "handforge/image.hpp"

#include <algorithm>
#include <cmath>

namespace handforge {

namespace {

Scalar sample_bilinear(const Grid& plane, Scalar x, Scalar y) {
  // x, y are index-space coordinates (pixel i sampled at i).
  const int w = static_cast<int>(plane.cols());
  const int h = static_cast<int>(plane.rows());
  const Scalar cx = std::clamp(x, 0.0, static_cast<Scalar>(w - 1));
  const Scalar cy = std::clamp(y, 0.0, static_cast<Scalar>(h - 1));
  const int x0 = std::min(static_cast<int>(cx), w - 1);
  const int y0 = std::min(static_cast<int>(cy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const Scalar fx = cx - x0;
  const Scalar fy = cy - y0;
  return (1 - fy) * ((1 - fx) * plane(y0, x0) + fx * plane(y0, x1)) +
         fy * ((1 - fx) * plane(y1, x0) + fx * plane(y1, x1));
}

Grid resize_plane(const Grid& src, int width, int height) {
  Grid dst(height, width);
  const Scalar sx = static_cast<Scalar>(src.cols()) / width;
  const Scalar sy = static_cast<Scalar>(src.rows()) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      dst(y, x) = sample_bilinear(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    }
  }
  return dst;
}

}  // namespace

ImageRGB resize_bilinear(const ImageRGB& src, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("resize target dimensions must be positive");
  }
  ImageRGB dst;
  dst.r = resize_plane(src.r, width, height);
  dst.g = resize_plane(src.g, width, height);
  dst.b = resize_plane(src.b, width, height);
  return dst;
}

MaskImage resize_mask(const MaskImage& src, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("resize target dimensions must be positive");
  }
  MaskImage dst(height, width);
  const Scalar sx = static_cast<Scalar>(src.cols()) / width;
  const Scalar sy = static_cast<Scalar>(src.rows()) / height;
  for (int y = 0; y < height; ++y) {
    const int sy0 = std::min(static_cast<int>((y + 0.5) * sy), static_cast<int>(src.rows()) - 1);
    for (int x = 0; x < width; ++x) {
      const int sx0 = std::min(static_cast<int>((x + 0.5) * sx), static_cast<int>(src.cols()) - 1);
      dst(y, x) = src(sy0, sx0);
    }
  }
  return dst;
}

ImageRGB flip_horizontal(const ImageRGB& src) {
  ImageRGB dst;
  dst.r = src.r.rowwise().reverse();
  dst.g = src.g.rowwise().reverse();
  dst.b = src.b.rowwise().reverse();
  return dst;
}

MaskImage flip_horizontal(const MaskImage& src) {
  return src.rowwise().reverse();
}

}  // namespace handforge
