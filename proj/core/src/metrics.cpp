#include "amisr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "amisr/dataset.hpp"
#include "amisr/errors.hpp"

namespace amisr {

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.data.size() != b.data.size()) {
    throw ShapeError(std::string(what) + ": images differ in size (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                     ")");
  }
}

double clamp01(double v, double hi) { return std::clamp(v, 0.0, hi); }

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b, double max_val) {
  require_same_shape(a, b, "psnr");
  if (a.data.empty()) throw ShapeError("psnr: empty images");
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = clamp01(a.data[i], max_val) - clamp01(b.data[i], max_val);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

std::vector<double> luma(const ImageBuffer& img) {
  std::vector<double> y(static_cast<size_t>(img.height * img.width));
  for (int64_t r = 0; r < img.height; ++r) {
    for (int64_t c = 0; c < img.width; ++c) {
      y[static_cast<size_t>(r * img.width + c)] = 0.299 * clamp01(img.at(r, c, 0), 1.0) +
                                                  0.587 * clamp01(img.at(r, c, 1), 1.0) +
                                                  0.114 * clamp01(img.at(r, c, 2), 1.0);
    }
  }
  return y;
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimOptions& o) {
  require_same_shape(a, b, "ssim");
  if (a.height < o.window || a.width < o.window) {
    throw ShapeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " is smaller than the " + std::to_string(o.window) + "x" + std::to_string(o.window) + " window");
  }
  std::vector<double> g(static_cast<size_t>(o.window));
  double gsum = 0.0;
  const double mid = (o.window - 1) / 2.0;
  for (int i = 0; i < o.window; ++i) {
    g[static_cast<size_t>(i)] = std::exp(-((i - mid) * (i - mid)) / (2.0 * o.sigma * o.sigma));
    gsum += g[static_cast<size_t>(i)];
  }
  for (double& v : g) v /= gsum;

  const std::vector<double> x = luma(a), y = luma(b);
  const int64_t H = a.height, W = a.width, K = o.window;
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);

  double total = 0.0;
  int64_t windows = 0;
  for (int64_t r0 = 0; r0 + K <= H; ++r0) {
    for (int64_t c0 = 0; c0 + K <= W; ++c0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int64_t i = 0; i < K; ++i) {
        for (int64_t j = 0; j < K; ++j) {
          const double w = g[static_cast<size_t>(i)] * g[static_cast<size_t>(j)];
          const double xv = x[static_cast<size_t>((r0 + i) * W + c0 + j)];
          const double yv = y[static_cast<size_t>((r0 + i) * W + c0 + j)];
          mx += w * xv;
          my += w * yv;
          sxx += w * xv * xv;
          syy += w * yv * yv;
          sxy += w * xv * yv;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

void MetricReport::add(PairMetric p) {
  pairs.push_back(std::move(p));
  double ps = 0.0, ss = 0.0;
  for (const auto& q : pairs) {
    ps += q.psnr;
    ss += q.ssim;
  }
  mean_psnr = ps / static_cast<double>(pairs.size());
  mean_ssim = ss / static_cast<double>(pairs.size());
}

MetricReport make_report(std::vector<PairMetric> pairs) {
  MetricReport r;
  for (auto& p : pairs) r.add(std::move(p));
  return r;
}

nlohmann::json MetricReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({{"name", p.name}, {"psnr", num(p.psnr)}, {"ssim", num(p.ssim)}});
  return nlohmann::json{{"pairs", arr},
                        {"mean_psnr", pairs.empty() ? nlohmann::json(nullptr) : num(mean_psnr)},
                        {"mean_ssim", pairs.empty() ? nlohmann::json(nullptr) : num(mean_ssim)},
                        {"count", pairs.size()}};
}

MetricReport evaluate_dirs(const std::filesystem::path& dir_sr, const std::filesystem::path& dir_hr) {
  std::set<std::string> sr_names, hr_names;
  for (const auto& p : list_images(dir_sr, "*.png")) sr_names.insert(p.filename().string());
  for (const auto& p : list_images(dir_hr, "*.png")) hr_names.insert(p.filename().string());
  for (const auto& n : hr_names) {
    if (!sr_names.count(n)) throw ConfigError("eval: '" + n + "' has no counterpart in " + dir_sr.string());
  }
  for (const auto& n : sr_names) {
    if (!hr_names.count(n)) throw ConfigError("eval: '" + n + "' has no counterpart in " + dir_hr.string());
  }
  if (hr_names.empty()) throw ConfigError("eval: no PNG files in " + dir_hr.string());
  MetricReport report;
  for (const auto& n : hr_names) {
    const ImageBuffer sr = read_png(dir_sr / n);
    const ImageBuffer hr = read_png(dir_hr / n);
    report.add({n, psnr(sr, hr), ssim(sr, hr)});
  }
  return report;
}

}  // namespace amisr
