#pragma once

#include <filesystem>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "amisr/image.hpp"

namespace amisr {

// RGB PSNR in dB after clamping both inputs to [0, max_val]. Identical inputs
// give +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double max_val = 1.0);

// Luma Y = 0.299R + 0.587G + 0.114B of a clamped image, row-major.
std::vector<double> luma(const ImageBuffer& img);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean SSIM of the luma over every fully contained window position.
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& opts = {});

struct PairMetric {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<PairMetric> pairs;
  // Infinite when any pair is infinite.
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  size_t count() const { return pairs.size(); }
  void add(PairMetric p);
  // Non-finite PSNR values serialize as null.
  nlohmann::json to_json() const;
};

MetricReport make_report(std::vector<PairMetric> pairs);

// Pairs every PNG in dir_hr with the same filename in dir_sr, ordered by
// name. A file present on one side only raises ConfigError naming it.
MetricReport evaluate_dirs(const std::filesystem::path& dir_sr, const std::filesystem::path& dir_hr);

}  // namespace amisr
