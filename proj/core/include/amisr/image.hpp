#pragma once

#include <filesystem>
#include <vector>

#include "amisr/tensor.hpp"

namespace amisr {

// Interleaved RGB, row-major, values in [0, 1].
struct ImageBuffer {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int64_t h, int64_t w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<size_t>(h * w * 3), fill) {}

  float& at(int64_t y, int64_t x, int c) { return data[static_cast<size_t>((y * width + x) * 3 + c)]; }
  float at(int64_t y, int64_t x, int c) const { return data[static_cast<size_t>((y * width + x) * 3 + c)]; }
  bool operator==(const ImageBuffer&) const = default;
};

// 8-bit grayscale, gray+alpha, RGB, RGBA or palette PNGs. Gray is replicated
// to three channels and alpha is dropped. Other depths raise FormatError.
ImageBuffer read_png(const std::filesystem::path& path);

// 8-bit RGB; each value is clamped to [0,1] and stored as round(v*255).
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

// Quantizes like write_png followed by read_png.
ImageBuffer quantize8(const ImageBuffer& img);

// Largest centered square.
ImageBuffer center_crop_square(const ImageBuffer& img);

// Stacks images into (N,3,H,W); all must share one size.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<ImageBuffer>& images);

// Sample n of an (N,3,H,W) tensor, clamped to [0,1].
template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, int64_t n = 0);

}  // namespace amisr
