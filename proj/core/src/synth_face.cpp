#include "amisr/synth_face.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "amisr/errors.hpp"
#include "amisr/rng.hpp"

namespace amisr {

namespace {

using Color = std::array<double, 3>;

Color mix(const Color& a, const Color& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

// Inside test for an axis-aligned ellipse in unit coordinates.
struct Ellipse {
  double cx, cy, rx, ry;
  double level(double x, double y) const {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy;
  }
  bool contains(double x, double y) const { return level(x, y) <= 1.0; }
};

struct Face {
  Color bg_top, bg_bottom, skin, hair, iris, lip, brow;
  Ellipse head, hair_cap, eye_l, eye_r, iris_l, iris_r, glint_l, glint_r, nose;
  double brow_y, brow_half, brow_thick;
  double mouth_cx, mouth_cy, mouth_w, mouth_curve, mouth_thick;
};

Color jitter(Rng& rng, Color c, double amount) {
  for (double& v : c) v = std::clamp(v + rng.uniform(-amount, amount), 0.0, 1.0);
  return c;
}

Face draw_params(uint64_t seed) {
  Rng rng(seed);
  Face f;
  f.bg_top = jitter(rng, {0.55, 0.65, 0.80}, 0.25);
  f.bg_bottom = jitter(rng, {0.25, 0.30, 0.40}, 0.2);
  const double tone = rng.uniform();
  f.skin = jitter(rng, mix({0.95, 0.80, 0.68}, {0.45, 0.30, 0.22}, tone), 0.05);
  f.hair = jitter(rng, mix({0.08, 0.06, 0.05}, {0.65, 0.45, 0.20}, rng.uniform()), 0.05);
  f.iris = jitter(rng, mix({0.20, 0.35, 0.55}, {0.30, 0.18, 0.08}, rng.uniform()), 0.05);
  f.lip = jitter(rng, {0.70, 0.30, 0.32}, 0.08);
  f.brow = mix(f.hair, {0.0, 0.0, 0.0}, 0.3);

  const double cx = 0.5 + rng.uniform(-0.04, 0.04);
  const double cy = 0.54 + rng.uniform(-0.03, 0.03);
  const double rx = rng.uniform(0.27, 0.34), ry = rng.uniform(0.34, 0.41);
  f.head = {cx, cy, rx, ry};
  f.hair_cap = {cx, cy - ry * rng.uniform(0.25, 0.4), rx * rng.uniform(1.05, 1.15), ry * rng.uniform(0.8, 0.95)};

  const double eye_dy = cy - ry * rng.uniform(0.15, 0.25);
  const double eye_dx = rx * rng.uniform(0.38, 0.48);
  const double erx = rx * rng.uniform(0.18, 0.24), ery = erx * rng.uniform(0.45, 0.65);
  f.eye_l = {cx - eye_dx, eye_dy, erx, ery};
  f.eye_r = {cx + eye_dx, eye_dy, erx, ery};
  const double ir = ery * rng.uniform(0.75, 0.95);
  const double gaze = rng.uniform(-0.3, 0.3) * erx;
  f.iris_l = {cx - eye_dx + gaze, eye_dy, ir, ir};
  f.iris_r = {cx + eye_dx + gaze, eye_dy, ir, ir};
  const double gr = ir * 0.3;
  f.glint_l = {f.iris_l.cx + ir * 0.35, eye_dy - ir * 0.35, gr, gr};
  f.glint_r = {f.iris_r.cx + ir * 0.35, eye_dy - ir * 0.35, gr, gr};

  f.brow_y = eye_dy - ery * rng.uniform(1.6, 2.2);
  f.brow_half = erx * rng.uniform(0.9, 1.2);
  f.brow_thick = ery * rng.uniform(0.25, 0.4);
  f.nose = {cx, cy + ry * 0.12, rx * rng.uniform(0.08, 0.12), ry * rng.uniform(0.10, 0.16)};

  f.mouth_cx = cx;
  f.mouth_cy = cy + ry * rng.uniform(0.45, 0.55);
  f.mouth_w = rx * rng.uniform(0.35, 0.5);
  f.mouth_curve = ry * rng.uniform(-0.04, 0.12);
  f.mouth_thick = ry * rng.uniform(0.035, 0.06);
  return f;
}

Color shade(const Face& f, double x, double y) {
  Color c = mix(f.bg_top, f.bg_bottom, y);
  if (f.hair_cap.contains(x, y) && !(f.head.contains(x, y) && y > f.hair_cap.cy - f.hair_cap.ry * 0.35)) c = f.hair;
  if (f.head.contains(x, y)) {
    // Darken towards the rim for a little volume.
    c = mix(f.skin, mix(f.skin, {0.0, 0.0, 0.0}, 0.35), std::pow(f.head.level(x, y), 3.0));
    if (f.nose.contains(x, y)) c = mix(c, {0.0, 0.0, 0.0}, 0.12 * (1.0 - f.nose.level(x, y)));
    for (const double side : {-1.0, 1.0}) {
      const Ellipse& eye = side < 0 ? f.eye_l : f.eye_r;
      const Ellipse& iris = side < 0 ? f.iris_l : f.iris_r;
      const Ellipse& glint = side < 0 ? f.glint_l : f.glint_r;
      if (eye.contains(x, y)) {
        c = {0.93, 0.93, 0.90};
        if (iris.contains(x, y)) c = iris.level(x, y) < 0.3 ? Color{0.03, 0.03, 0.03} : f.iris;
        if (glint.contains(x, y)) c = {1.0, 1.0, 1.0};
      }
      const double bx = (x - eye.cx) / f.brow_half;
      const double arch = f.brow_y - 0.25 * f.brow_thick * (1.0 - bx * bx) * 4.0;
      if (std::abs(bx) <= 1.0 && std::abs(y - arch) <= f.brow_thick) c = f.brow;
    }
    const double mx = (x - f.mouth_cx) / f.mouth_w;
    if (std::abs(mx) <= 1.0) {
      const double arc = f.mouth_cy + f.mouth_curve * (1.0 - mx * mx);
      if (std::abs(y - arc) <= f.mouth_thick * (1.0 - 0.5 * mx * mx)) c = f.lip;
    }
  }
  return c;
}

}  // namespace

ImageBuffer synth_face(uint64_t seed, int64_t size) {
  if (size < 32) throw ConfigError("synth_face: size must be at least 32, got " + std::to_string(size));
  const Face face = draw_params(seed);
  constexpr int kSub = 4;
  ImageBuffer img(size, size);
  const double inv = 1.0 / static_cast<double>(size);
  for (int64_t py = 0; py < size; ++py) {
    for (int64_t px = 0; px < size; ++px) {
      Color acc{0.0, 0.0, 0.0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double x = (static_cast<double>(px) + (sx + 0.5) / kSub) * inv;
          const double y = (static_cast<double>(py) + (sy + 0.5) / kSub) * inv;
          const Color c = shade(face, x, y);
          for (int k = 0; k < 3; ++k) acc[static_cast<size_t>(k)] += c[static_cast<size_t>(k)];
        }
      }
      for (int k = 0; k < 3; ++k) {
        img.at(py, px, k) =
            static_cast<float>(std::clamp(acc[static_cast<size_t>(k)] / (kSub * kSub), 0.0, 1.0));
      }
    }
  }
  return img;
}

}  // namespace amisr
