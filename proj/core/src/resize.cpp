#include "amisr/resize.hpp"

#include <algorithm>
#include <cmath>

#include "amisr/errors.hpp"

namespace amisr {

double cubic_kernel(double x, double a) {
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

std::vector<ResampleTaps> bicubic_taps(int64_t in, int64_t out) {
  if (in < 1 || out < 1) throw ShapeError("bicubic: extents must be positive");
  if (out < in && in < 4) throw ShapeError("bicubic: cannot shrink an extent below 4");
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double stretch = std::max(scale, 1.0);
  const double support = 2.0 * stretch;
  std::vector<ResampleTaps> taps(static_cast<size_t>(out));
  for (int64_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const auto lo = static_cast<int64_t>(std::floor(center - support));
    const auto hi = static_cast<int64_t>(std::ceil(center + support));
    ResampleTaps& t = taps[static_cast<size_t>(i)];
    double total = 0.0;
    for (int64_t j = lo; j <= hi; ++j) {
      const double w = cubic_kernel((static_cast<double>(j) - center) / stretch);
      if (w == 0.0) continue;
      t.index.push_back(std::clamp<int64_t>(j, 0, in - 1));
      t.weight.push_back(w);
      total += w;
    }
    for (double& w : t.weight) w /= total;
  }
  return taps;
}

ImageBuffer bicubic_resize(const ImageBuffer& img, int64_t out_h, int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("bicubic: degenerate target size");
  const auto rows = bicubic_taps(img.height, out_h);
  const auto cols = bicubic_taps(img.width, out_w);

  // Horizontal pass in double, then vertical.
  std::vector<double> tmp(static_cast<size_t>(img.height * out_w * 3), 0.0);
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < out_w; ++x) {
      const ResampleTaps& t = cols[static_cast<size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (size_t k = 0; k < t.index.size(); ++k) acc += t.weight[k] * img.at(y, t.index[k], c);
        tmp[static_cast<size_t>((y * out_w + x) * 3 + c)] = acc;
      }
    }
  }
  ImageBuffer out(out_h, out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    const ResampleTaps& t = rows[static_cast<size_t>(y)];
    for (int64_t x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (size_t k = 0; k < t.index.size(); ++k) {
          acc += t.weight[k] * tmp[static_cast<size_t>((t.index[k] * out_w + x) * 3 + c)];
        }
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace amisr
