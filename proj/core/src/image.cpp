#include "amisr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "amisr/errors.hpp"

namespace amisr {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp message) {
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg) *msg = message;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path.string() + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng: cannot allocate a read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot allocate an info struct");
  }
  ImageBuffer img;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  std::string unsupported;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "': " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    unsupported = "unsupported depth 16 (8-bit images only)";
  } else {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.height = png_get_image_height(png, info);
    img.width = png_get_image_width(png, info);
    const size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<size_t>(img.width) * 3) {
      unsupported = "unexpected row layout after conversion";
    } else {
      pixels.resize(stride * static_cast<size_t>(img.height));
      rows.resize(static_cast<size_t>(img.height));
      for (int64_t y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = pixels.data() + y * stride;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!unsupported.empty()) throw FormatError("'" + path.string() + "': " + unsupported);

  img.data.resize(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) img.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  if (img.height <= 0 || img.width <= 0 || img.data.size() != static_cast<size_t>(img.height * img.width * 3)) {
    throw ShapeError("write_png: malformed image buffer");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");

  std::vector<png_byte> pixels(img.data.size());
  for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_byte(img.data[i]);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int64_t y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = pixels.data() + y * img.width * 3;

  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng: cannot allocate a write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot allocate an info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("'" + path.string() + "': " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer quantize8(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (float& v : out.data) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

ImageBuffer center_crop_square(const ImageBuffer& img) {
  const int64_t side = std::min(img.height, img.width);
  const int64_t y0 = (img.height - side) / 2, x0 = (img.width - side) / 2;
  ImageBuffer out(side, side);
  for (int64_t y = 0; y < side; ++y) {
    for (int64_t x = 0; x < side; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y + y0, x + x0, c);
    }
  }
  return out;
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<ImageBuffer>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: no images");
  const int64_t H = images[0].height, W = images[0].width;
  Tensor<T> t(Shape(static_cast<int64_t>(images.size()), 3, H, W));
  T* dst = t.mutable_ptr();
  for (size_t n = 0; n < images.size(); ++n) {
    const ImageBuffer& img = images[n];
    if (img.height != H || img.width != W) throw ShapeError("images_to_tensor: images differ in size");
    for (int c = 0; c < 3; ++c) {
      for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) *dst++ = static_cast<T>(img.at(y, x, c));
      }
    }
  }
  return t;
}

template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, int64_t n) {
  const Shape& s = t.shape();
  if (s.c() != 3 || n < 0 || n >= s.n()) throw ShapeError("tensor_to_image: expected (N,3,H,W), got " + s.str());
  ImageBuffer img(s.h(), s.w());
  for (int c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < s.h(); ++y) {
      for (int64_t x = 0; x < s.w(); ++x) {
        img.at(y, x, c) = std::clamp(static_cast<float>(t.at(n, c, y, x)), 0.0f, 1.0f);
      }
    }
  }
  return img;
}

template Tensor<float> images_to_tensor(const std::vector<ImageBuffer>&);
template Tensor<double> images_to_tensor(const std::vector<ImageBuffer>&);
template ImageBuffer tensor_to_image(const Tensor<float>&, int64_t);
template ImageBuffer tensor_to_image(const Tensor<double>&, int64_t);

}  // namespace amisr
