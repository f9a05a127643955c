#include "amisr/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <vector>

#include "amisr/errors.hpp"
#include "amisr/parallel.hpp"

namespace amisr::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

thread_local uint64_t t_macs = 0;

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

struct ConvDims {
  int64_t n, cin, h, w;
  int64_t cout, kh, kw;
  int64_t ho, wo;
  int64_t cin_g, cout_g;
  int64_t k() const { return cin_g * kh * kw; }
  int64_t p() const { return ho * wo; }
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, ConvGeometry g) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (g.groups < 1 || g.stride < 1 || g.padding < 0) throw ShapeError("conv2d: invalid geometry");
  if (xs.c() % g.groups != 0) {
    throw ShapeError("conv2d: groups " + std::to_string(g.groups) + " do not divide input channels " +
                     std::to_string(xs.c()));
  }
  if (ws.n() % g.groups != 0) throw ShapeError("conv2d: groups do not divide output channels");
  if (ws.c() * g.groups != xs.c()) {
    throw ShapeError("conv2d: kernel " + ws.str() + " does not match input " + xs.str() + " with groups " +
                     std::to_string(g.groups));
  }
  if (bias != nullptr && bias->numel() != ws.n()) throw ShapeError("conv2d: bias length != output channels");
  ConvDims d{xs.n(), xs.c(), xs.h(), xs.w(), ws.n(), ws.h(), ws.w(), 0, 0, ws.c(), ws.n() / g.groups};
  d.ho = conv_output_extent(d.h, d.kh, g.stride, g.padding);
  d.wo = conv_output_extent(d.w, d.kw, g.stride, g.padding);
  return d;
}

// Unfolds one group of input planes into a (cin_g*kh*kw, ho*wo) matrix.
template <typename T>
void im2col(const T* x, const ConvDims& d, ConvGeometry g, T* cols) {
  const int64_t P = d.p();
  for (int64_t c = 0; c < d.cin_g; ++c) {
    const T* plane = x + c * d.h * d.w;
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        T* row = cols + ((c * d.kh + ky) * d.kw + kx) * P;
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          T* dst = row + oy * d.wo;
          const int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= d.h) {
            std::fill(dst, dst + d.wo, T(0));
            continue;
          }
          const T* src = plane + iy * d.w;
          if (g.stride == 1) {
            const int64_t lo = std::clamp<int64_t>(g.padding - kx, 0, d.wo);
            const int64_t hi = std::clamp<int64_t>(d.w + g.padding - kx, lo, d.wo);
            std::fill(dst, dst + lo, T(0));
            std::memcpy(dst + lo, src + lo + kx - g.padding, sizeof(T) * static_cast<size_t>(hi - lo));
            std::fill(dst + hi, dst + d.wo, T(0));
          } else {
            for (int64_t ox = 0; ox < d.wo; ++ox) {
              const int64_t ix = ox * g.stride - g.padding + kx;
              dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvDims& d, ConvGeometry g, T* x) {
  const int64_t P = d.p();
  for (int64_t c = 0; c < d.cin_g; ++c) {
    T* plane = x + c * d.h * d.w;
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const T* row = cols + ((c * d.kh + ky) * d.kw + kx) * P;
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          const int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= d.h) continue;
          const T* src = row + oy * d.wo;
          T* dst = plane + iy * d.w;
          if (g.stride == 1) {
            const int64_t lo = std::clamp<int64_t>(g.padding - kx, 0, d.wo);
            const int64_t hi = std::clamp<int64_t>(d.w + g.padding - kx, lo, d.wo);
            T* base = dst + kx - g.padding;
            for (int64_t ox = lo; ox < hi; ++ox) base[ox] += src[ox];
          } else {
            for (int64_t ox = 0; ox < d.wo; ++ox) {
              const int64_t ix = ox * g.stride - g.padding + kx;
              if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

bool is_depthwise(const ConvDims& d, ConvGeometry g) {
  return g.groups > 1 && g.groups == d.cin && d.cin_g == 1 && d.cout == d.cin;
}

bool is_pointwise(const ConvDims& d, ConvGeometry g) {
  return d.kh == 1 && d.kw == 1 && g.stride == 1 && g.padding == 0;
}

// Valid output-column range [lo, hi) for a stride-1 tap at kernel column kx.
inline void tap_range(const ConvDims& d, int padding, int64_t kx, int64_t& lo, int64_t& hi) {
  lo = std::clamp<int64_t>(padding - kx, 0, d.wo);
  hi = std::clamp<int64_t>(d.w + padding - kx, lo, d.wo);
}

template <typename T>
void depthwise_forward_plane(const T* x, const T* wk, T bias, const ConvDims& d, ConvGeometry g, T* y) {
  for (int64_t oy = 0; oy < d.ho; ++oy) {
    T* yrow = y + oy * d.wo;
    std::fill(yrow, yrow + d.wo, bias);
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      const int64_t iy = oy * g.stride - g.padding + ky;
      if (iy < 0 || iy >= d.h) continue;
      const T* xrow = x + iy * d.w;
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const T wv = wk[ky * d.kw + kx];
        if (g.stride == 1) {
          int64_t lo, hi;
          tap_range(d, g.padding, kx, lo, hi);
          const T* src = xrow + kx - g.padding;
          for (int64_t ox = lo; ox < hi; ++ox) yrow[ox] += wv * src[ox];
        } else {
          for (int64_t ox = 0; ox < d.wo; ++ox) {
            const int64_t ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < d.w) yrow[ox] += wv * xrow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_plane(const T* x, const T* wk, const T* gy, const ConvDims& d, ConvGeometry g, T* gx,
                              T* gw) {
  for (int64_t oy = 0; oy < d.ho; ++oy) {
    const T* grow = gy + oy * d.wo;
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      const int64_t iy = oy * g.stride - g.padding + ky;
      if (iy < 0 || iy >= d.h) continue;
      const T* xrow = x + iy * d.w;
      T* gxrow = gx != nullptr ? gx + iy * d.w : nullptr;
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const int64_t tap = ky * d.kw + kx;
        if (g.stride == 1) {
          int64_t lo, hi;
          tap_range(d, g.padding, kx, lo, hi);
          const int64_t shift = kx - g.padding;
          if (gxrow != nullptr) {
            const T wv = wk[tap];
            T* dst = gxrow + shift;
            for (int64_t ox = lo; ox < hi; ++ox) dst[ox] += wv * grow[ox];
          }
          if (gw != nullptr) {
            const T* src = xrow + shift;
            T acc = 0;
            for (int64_t ox = lo; ox < hi; ++ox) acc += grow[ox] * src[ox];
            gw[tap] += acc;
          }
        } else {
          T acc = 0;
          for (int64_t ox = 0; ox < d.wo; ++ox) {
            const int64_t ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= d.w) continue;
            if (gxrow != nullptr) gxrow[ix] += wk[tap] * grow[ox];
            acc += grow[ox] * xrow[ix];
          }
          if (gw != nullptr) gw[tap] += acc;
        }
      }
    }
  }
}

}  // namespace

int64_t conv_output_extent(int64_t in, int64_t kernel, int stride, int padding) {
  const int64_t span = in + 2 * padding - kernel;
  if (span < 0) {
    throw ShapeError("convolution kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return span / stride + 1;
}

uint64_t mac_count() { return t_macs; }
void reset_mac_count() { t_macs = 0; }

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, ConvGeometry g) {
  const ConvDims d = conv_dims(x, w, bias, g);
  Tensor<T> y(Shape(d.n, d.cout, d.ho, d.wo));
  t_macs += static_cast<uint64_t>(d.n * d.cout * d.p() * d.k());
  const T* xp = x.ptr();
  const T* wp = w.ptr();
  const T* bp = bias != nullptr ? bias->ptr() : nullptr;
  T* yp = y.mutable_ptr();

  if (is_depthwise(d, g)) {
    parallel_for(d.n * d.cin, [&](int64_t nc) {
      const int64_t c = nc % d.cin;
      depthwise_forward_plane(xp + nc * d.h * d.w, wp + c * d.kh * d.kw, bp != nullptr ? bp[c] : T(0), d, g,
                              yp + nc * d.p());
    });
    return y;
  }

  const bool pointwise = is_pointwise(d, g);
  parallel_for(d.n, [&](int64_t n) {
    std::vector<T>& cols = scratch<T>(0);
    for (int64_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = xp + (n * d.cin + grp * d.cin_g) * d.h * d.w;
      const T* colp = xg;
      if (!pointwise) {
        cols.resize(static_cast<size_t>(d.k() * d.p()));
        im2col(xg, d, g, cols.data());
        colp = cols.data();
      }
      MapMat<T> ym(yp + (n * d.cout + grp * d.cout_g) * d.p(), d.cout_g, d.p());
      ConstMapMat<T> wm(wp + grp * d.cout_g * d.k(), d.cout_g, d.k());
      ConstMapMat<T> cm(colp, d.k(), d.p());
      ym.noalias() = wm * cm;
      if (bp != nullptr) {
        for (int64_t co = 0; co < d.cout_g; ++co) ym.row(co).array() += bp[grp * d.cout_g + co];
      }
    }
  });
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y, ConvGeometry g,
                     Tensor<T>* grad_x, Tensor<T>* grad_w, Tensor<T>* grad_b) {
  const ConvDims d = conv_dims<T>(x, w, nullptr, g);
  if (grad_y.shape() != Shape(d.n, d.cout, d.ho, d.wo)) throw ShapeError("conv2d backward: grad shape mismatch");
  const T* xp = x.ptr();
  const T* wp = w.ptr();
  const T* gyp = grad_y.ptr();
  T* gxp = grad_x != nullptr ? grad_x->mutable_ptr() : nullptr;
  T* gwp = grad_w != nullptr ? grad_w->mutable_ptr() : nullptr;

  if (grad_b != nullptr) {
    T* gbp = grad_b->mutable_ptr();
    for (int64_t n = 0; n < d.n; ++n) {
      for (int64_t co = 0; co < d.cout; ++co) {
        const T* row = gyp + (n * d.cout + co) * d.p();
        T acc = 0;
        for (int64_t i = 0; i < d.p(); ++i) acc += row[i];
        gbp[co] += acc;
      }
    }
  }

  if (is_depthwise(d, g)) {
    for (int64_t n = 0; n < d.n; ++n) {
      for (int64_t c = 0; c < d.cin; ++c) {
        const int64_t nc = n * d.cin + c;
        depthwise_backward_plane(xp + nc * d.h * d.w, wp + c * d.kh * d.kw, gyp + nc * d.p(), d, g,
                                 gxp != nullptr ? gxp + nc * d.h * d.w : nullptr,
                                 gwp != nullptr ? gwp + c * d.kh * d.kw : nullptr);
      }
    }
    return;
  }

  const bool pointwise = is_pointwise(d, g);
  std::vector<T>& cols = scratch<T>(0);
  std::vector<T>& dcols = scratch<T>(1);
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = xp + (n * d.cin + grp * d.cin_g) * d.h * d.w;
      ConstMapMat<T> gym(gyp + (n * d.cout + grp * d.cout_g) * d.p(), d.cout_g, d.p());
      ConstMapMat<T> wm(wp + grp * d.cout_g * d.k(), d.cout_g, d.k());
      if (gwp != nullptr) {
        const T* colp = xg;
        if (!pointwise) {
          cols.resize(static_cast<size_t>(d.k() * d.p()));
          im2col(xg, d, g, cols.data());
          colp = cols.data();
        }
        ConstMapMat<T> cm(colp, d.k(), d.p());
        MapMat<T> gwm(gwp + grp * d.cout_g * d.k(), d.cout_g, d.k());
        gwm.noalias() += gym * cm.transpose();
      }
      if (gxp != nullptr) {
        T* gxg = gxp + (n * d.cin + grp * d.cin_g) * d.h * d.w;
        if (pointwise) {
          MapMat<T> gxm(gxg, d.cin_g, d.p());
          gxm.noalias() += wm.transpose() * gym;
        } else {
          dcols.resize(static_cast<size_t>(d.k() * d.p()));
          MapMat<T> dm(dcols.data(), d.k(), d.p());
          dm.noalias() = wm.transpose() * gym;
          col2im_add(dcols.data(), d, g, gxg);
        }
      }
    }
  }
}

namespace {

struct TconvDims {
  int64_t n, cin, h, w, cout, ho, wo;
};

template <typename T>
TconvDims tconv_dims(const Tensor<T>& x, const Tensor<T>& w, int64_t out_h, int64_t out_w) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.n() != xs.c() || ws.h() != 2 || ws.w() != 2) {
    throw ShapeError("transposed_conv2d: kernel " + ws.str() + " must be (C_in, C_out, 2, 2) for input " +
                     xs.str());
  }
  TconvDims d{xs.n(), xs.c(), xs.h(), xs.w(), ws.c(), out_h > 0 ? out_h : 2 * xs.h(),
              out_w > 0 ? out_w : 2 * xs.w()};
  if (d.ho < 2 * d.h - 1 || d.ho > 2 * d.h || d.wo < 2 * d.w - 1 || d.wo > 2 * d.w) {
    throw ShapeError("transposed_conv2d: output extent must be 2H or 2H-1");
  }
  return d;
}

}  // namespace

template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int64_t out_h,
                            int64_t out_w) {
  const TconvDims d = tconv_dims(x, w, out_h, out_w);
  if (bias != nullptr && bias->numel() != d.cout) throw ShapeError("transposed_conv2d: bias length mismatch");
  Tensor<T> y(Shape(d.n, d.cout, d.ho, d.wo));
  t_macs += static_cast<uint64_t>(d.n * d.cout * d.ho * d.wo * d.cin);
  const int64_t hw = d.h * d.w;
  ConstMapMat<T> wm(w.ptr(), d.cin, d.cout * 4);
  std::vector<T> z(static_cast<size_t>(d.cout * 4 * hw));
  for (int64_t n = 0; n < d.n; ++n) {
    ConstMapMat<T> xm(x.ptr() + n * d.cin * hw, d.cin, hw);
    MapMat<T> zm(z.data(), d.cout * 4, hw);
    zm.noalias() = wm.transpose() * xm;
    for (int64_t co = 0; co < d.cout; ++co) {
      T* plane = y.mutable_ptr() + (n * d.cout + co) * d.ho * d.wo;
      const T b = bias != nullptr ? bias->ptr()[co] : T(0);
      for (int64_t tap = 0; tap < 4; ++tap) {
        const int64_t dy = tap / 2, dx = tap % 2;
        const T* zr = z.data() + (co * 4 + tap) * hw;
        for (int64_t i = 0; i < d.h; ++i) {
          const int64_t oy = 2 * i + dy;
          if (oy >= d.ho) continue;
          T* row = plane + oy * d.wo;
          for (int64_t j = 0; j < d.w; ++j) {
            const int64_t ox = 2 * j + dx;
            if (ox < d.wo) row[ox] = zr[i * d.w + j] + b;
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
void transposed_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y,
                                Tensor<T>* grad_x, Tensor<T>* grad_w, Tensor<T>* grad_b) {
  const TconvDims d = tconv_dims(x, w, grad_y.shape().h(), grad_y.shape().w());
  const int64_t hw = d.h * d.w;
  ConstMapMat<T> wm(w.ptr(), d.cin, d.cout * 4);
  std::vector<T> gz(static_cast<size_t>(d.cout * 4 * hw));
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t co = 0; co < d.cout; ++co) {
      const T* plane = grad_y.ptr() + (n * d.cout + co) * d.ho * d.wo;
      if (grad_b != nullptr) {
        T acc = 0;
        for (int64_t i = 0; i < d.ho * d.wo; ++i) acc += plane[i];
        grad_b->mutable_ptr()[co] += acc;
      }
      for (int64_t tap = 0; tap < 4; ++tap) {
        const int64_t dy = tap / 2, dx = tap % 2;
        T* zr = gz.data() + (co * 4 + tap) * hw;
        for (int64_t i = 0; i < d.h; ++i) {
          const int64_t oy = 2 * i + dy;
          for (int64_t j = 0; j < d.w; ++j) {
            const int64_t ox = 2 * j + dx;
            zr[i * d.w + j] = (oy < d.ho && ox < d.wo) ? plane[oy * d.wo + ox] : T(0);
          }
        }
      }
    }
    ConstMapMat<T> gzm(gz.data(), d.cout * 4, hw);
    if (grad_x != nullptr) {
      MapMat<T> gxm(grad_x->mutable_ptr() + n * d.cin * hw, d.cin, hw);
      gxm.noalias() += wm * gzm;
    }
    if (grad_w != nullptr) {
      ConstMapMat<T> xm(x.ptr() + n * d.cin * hw, d.cin, hw);
      MapMat<T> gwm(grad_w->mutable_ptr(), d.cin, d.cout * 4);
      gwm.noalias() += xm * gzm.transpose();
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.n() != bs.n() || as.c() != bs.c() || as.w() != bs.h()) {
    throw ShapeError("matmul: cannot multiply " + as.str() + " by " + bs.str());
  }
  const int64_t M = as.h(), K = as.w(), P = bs.w();
  Tensor<T> y(Shape(as.n(), as.c(), M, P));
  t_macs += static_cast<uint64_t>(as.n() * as.c() * M * K * P);
  for (int64_t i = 0; i < as.n() * as.c(); ++i) {
    ConstMapMat<T> am(a.ptr() + i * M * K, M, K);
    ConstMapMat<T> bm(b.ptr() + i * K * P, K, P);
    MapMat<T> ym(y.mutable_ptr() + i * M * P, M, P);
    ym.noalias() = am * bm;
  }
  return y;
}

template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_y, Tensor<T>* grad_a,
                     Tensor<T>* grad_b) {
  const Shape& as = a.shape();
  const int64_t M = as.h(), K = as.w(), P = b.shape().w();
  for (int64_t i = 0; i < as.n() * as.c(); ++i) {
    ConstMapMat<T> am(a.ptr() + i * M * K, M, K);
    ConstMapMat<T> bm(b.ptr() + i * K * P, K, P);
    ConstMapMat<T> gm(grad_y.ptr() + i * M * P, M, P);
    if (grad_a != nullptr) {
      MapMat<T> ga(grad_a->mutable_ptr() + i * M * K, M, K);
      ga.noalias() += gm * bm.transpose();
    }
    if (grad_b != nullptr) {
      MapMat<T> gb(grad_b->mutable_ptr() + i * K * P, K, P);
      gb.noalias() += am.transpose() * gm;
    }
  }
}

#define AMISR_INSTANTIATE(T)                                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, ConvGeometry);             \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ConvGeometry,          \
                                Tensor<T>*, Tensor<T>*, Tensor<T>*);                                          \
  template Tensor<T> transposed_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, int64_t,        \
                                       int64_t);                                                              \
  template void transposed_conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, \
                                           Tensor<T>*, Tensor<T>*);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                             \
  template void matmul_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>*);

AMISR_INSTANTIATE(float)
AMISR_INSTANTIATE(double)

#undef AMISR_INSTANTIATE

}  // namespace amisr::kernels
