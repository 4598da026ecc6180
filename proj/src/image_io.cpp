#include "handforge/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace handforge {

namespace {

constexpr Scalar kGamma = 2.2;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t encode_srgb(Scalar linear) {
  const Scalar clamped = std::clamp(linear, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(std::pow(clamped, 1.0 / kGamma) * 255.0));
}

Scalar decode_srgb(std::uint8_t value) {
  return std::pow(value / 255.0, kGamma);
}

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;  // row-major, interleaved
};

PngImage read_png(const std::string& path, bool want_gray) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open PNG for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG: " + path);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
      png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (want_gray) {
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
  } else {
    if (!(png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)) {
      png_set_gray_to_rgb(png);
    }
  }
  png_read_update_info(png, info);

  PngImage out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = want_gray ? 1 : 3;
  out.data.resize(static_cast<size_t>(out.width) * out.height * out.channels);

  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) {
    rows[y] = out.data.data() + static_cast<size_t>(y) * out.width * out.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& data) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open PNG for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG: " + path);
  }

  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageRGB read_png_rgb(const std::string& path) {
  const PngImage raw = read_png(path, false);
  ImageRGB img = ImageRGB::zeros(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const size_t at = (static_cast<size_t>(y) * raw.width + x) * 3;
      img.r(y, x) = decode_srgb(raw.data[at]);
      img.g(y, x) = decode_srgb(raw.data[at + 1]);
      img.b(y, x) = decode_srgb(raw.data[at + 2]);
    }
  }
  return img;
}

void write_png_rgb(const std::string& path, const ImageRGB& image) {
  const int w = image.width(), h = image.height();
  std::vector<std::uint8_t> data(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t at = (static_cast<size_t>(y) * w + x) * 3;
      data[at] = encode_srgb(image.r(y, x));
      data[at + 1] = encode_srgb(image.g(y, x));
      data[at + 2] = encode_srgb(image.b(y, x));
    }
  }
  write_png(path, w, h, 3, data);
}

MaskImage read_png_mask(const std::string& path) {
  const PngImage raw = read_png(path, true);
  MaskImage mask(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      mask(y, x) = raw.data[static_cast<size_t>(y) * raw.width + x] >= 128 ? 1 : 0;
    }
  }
  return mask;
}

void write_png_mask(const std::string& path, const MaskImage& mask) {
  const int w = static_cast<int>(mask.cols()), h = static_cast<int>(mask.rows());
  std::vector<std::uint8_t> data(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      data[static_cast<size_t>(y) * w + x] = mask(y, x) ? 255 : 0;
    }
  }
  write_png(path, w, h, 1, data);
}

void write_png_gray(const std::string& path, const Grid& values) {
  const int w = static_cast<int>(values.cols()), h = static_cast<int>(values.rows());
  std::vector<std::uint8_t> data(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Scalar v = std::clamp(values(y, x), 0.0, 1.0);
      data[static_cast<size_t>(y) * w + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_png(path, w, h, 1, data);
}

}  // namespace handforge
