#pragma once

#include <vector>

#include "amisr/image.hpp"

namespace amisr {

// Separable cubic convolution with a = -0.5. When shrinking, the kernel is
// stretched by the minification factor (anti-aliasing). Source indices
// outside the image clamp to the nearest edge. Output is clamped to [0,1].
ImageBuffer bicubic_resize(const ImageBuffer& img, int64_t out_h, int64_t out_w);

// Contribution list of one output sample along one axis; weights sum to 1.
struct ResampleTaps {
  std::vector<int64_t> index;
  std::vector<double> weight;
};

std::vector<ResampleTaps> bicubic_taps(int64_t in, int64_t out);

double cubic_kernel(double x, double a = -0.5);

}  // namespace amisr
