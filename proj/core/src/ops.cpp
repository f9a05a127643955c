#include "amisr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "amisr/errors.hpp"
#include "amisr/kernels.hpp"

namespace amisr::ops {

namespace {

template <typename T>
using Grads = std::span<Tensor<T>* const>;

template <typename T>
Var<T> finish(OpKind kind, Tensor<T> out, std::initializer_list<Var<T>> inputs,
              typename Tape<T>::Adjoint adjoint) {
  if (!out.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op_name(kind));
  Tape<T>* tape = nullptr;
  for (const auto& v : inputs) {
    if (v.tape() != nullptr && v.requires_grad()) tape = v.tape();
  }
  if (tape == nullptr) return Var<T>(std::move(out));
  std::vector<Var<T>> ins(inputs);
  return tape->record(kind, std::move(out), ins, std::move(adjoint));
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.mutable_data();
  auto s = src.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void require_defined(bool defined, const char* op, const char* what) {
  if (!defined) throw ShapeError(std::string(op) + ": " + what + " is undefined");
}

// Channel broadcast layout of a binary op.
enum class Bcast { none, a_single, b_single };

Bcast broadcast_mode(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Bcast::none;
  const bool rest_match = a.n() == b.n() && a.h() == b.h() && a.w() == b.w();
  if (rest_match && a.c() == 1) return Bcast::a_single;
  if (rest_match && b.c() == 1) return Bcast::b_single;
  throw ShapeError(std::string(op) + ": shapes " + a.str() + " and " + b.str() + " are not broadcastable");
}

// Visits (out_index, a_index, b_index) for a broadcast-aware binary op.
template <typename F>
void for_each_pair(const Shape& out, Bcast mode, F&& f) {
  const int64_t C = out.c(), P = out.plane();
  int64_t idx = 0;
  for (int64_t n = 0; n < out.n(); ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const int64_t single = n * P;
      for (int64_t p = 0; p < P; ++p, ++idx) {
        const int64_t ia = mode == Bcast::a_single ? single + p : idx;
        const int64_t ib = mode == Bcast::b_single ? single + p : idx;
        f(idx, ia, ib);
      }
    }
  }
}

Shape broadcast_shape(const Shape& a, const Shape& b, Bcast mode) {
  return mode == Bcast::a_single ? b : a;
}

}  // namespace

double gelu_value(double x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

double gelu_derivative(double x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const double t = std::tanh(k * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * x * x);
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dOptions opts) {
  require_defined(x.defined() && w.defined(), "conv2d", "input or kernel");
  const kernels::ConvGeometry g{opts.stride, opts.padding, opts.groups};
  const Tensor<T>* b = bias.defined() ? &bias.value() : nullptr;
  Tensor<T> out = kernels::conv2d(x.value(), w.value(), b, g);
  Tensor<T> xv = x.value(), wv = w.value();
  auto adjoint = [xv, wv, g](const Tensor<T>& gy, Grads<T> gin) {
    kernels::conv2d_backward(xv, wv, gy, g, gin[0], gin[1], gin.size() > 2 ? gin[2] : nullptr);
  };
  if (bias.defined()) return finish<T>(OpKind::conv2d, std::move(out), {x, w, bias}, adjoint);
  return finish<T>(OpKind::conv2d, std::move(out), {x, w}, adjoint);
}

template <typename T>
Var<T> transposed_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int64_t out_h, int64_t out_w) {
  require_defined(x.defined() && w.defined(), "transposed_conv2d", "input or kernel");
  const Tensor<T>* b = bias.defined() ? &bias.value() : nullptr;
  Tensor<T> out = kernels::transposed_conv2d(x.value(), w.value(), b, out_h, out_w);
  Tensor<T> xv = x.value(), wv = w.value();
  auto adjoint = [xv, wv](const Tensor<T>& gy, Grads<T> gin) {
    kernels::transposed_conv2d_backward(xv, wv, gy, gin[0], gin[1], gin.size() > 2 ? gin[2] : nullptr);
  };
  if (bias.defined()) return finish<T>(OpKind::transposed_conv2d, std::move(out), {x, w, bias}, adjoint);
  return finish<T>(OpKind::transposed_conv2d, std::move(out), {x, w}, adjoint);
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = kernels::matmul(a.value(), b.value());
  Tensor<T> av = a.value(), bv = b.value();
  return finish<T>(OpKind::matmul, std::move(out), {a, b}, [av, bv](const Tensor<T>& gy, Grads<T> gin) {
    kernels::matmul_backward(av, bv, gy, gin[0], gin[1]);
  });
}

namespace {

struct AxisLayout {
  int64_t outer, len, inner;
};

AxisLayout axis_layout(const Shape& s, int axis) {
  if (axis < 0 || axis > 3) throw ShapeError("axis " + std::to_string(axis) + " out of range for rank-4 tensor");
  AxisLayout l{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) l.outer *= s[i];
  for (int i = axis + 1; i < 4; ++i) l.inner *= s[i];
  return l;
}

}  // namespace

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  const AxisLayout l = axis_layout(x.shape(), axis);
  Tensor<T> y(x.shape());
  const T* xp = x.value().ptr();
  T* yp = y.mutable_ptr();
  for (int64_t o = 0; o < l.outer; ++o) {
    for (int64_t i = 0; i < l.inner; ++i) {
      const int64_t base = o * l.len * l.inner + i;
      T mx = xp[base];
      for (int64_t k = 1; k < l.len; ++k) mx = std::max(mx, xp[base + k * l.inner]);
      T total = 0;
      for (int64_t k = 0; k < l.len; ++k) {
        const T e = std::exp(xp[base + k * l.inner] - mx);
        yp[base + k * l.inner] = e;
        total += e;
      }
      for (int64_t k = 0; k < l.len; ++k) yp[base + k * l.inner] /= total;
    }
  }
  Tensor<T> yv = y;
  return finish<T>(OpKind::softmax, std::move(y), {x}, [yv, l](const Tensor<T>& gy, Grads<T> gin) {
    const T* s = yv.ptr();
    const T* g = gy.ptr();
    T* gx = gin[0]->mutable_ptr();
    for (int64_t o = 0; o < l.outer; ++o) {
      for (int64_t i = 0; i < l.inner; ++i) {
        const int64_t base = o * l.len * l.inner + i;
        T dot = 0;
        for (int64_t k = 0; k < l.len; ++k) dot += g[base + k * l.inner] * s[base + k * l.inner];
        for (int64_t k = 0; k < l.len; ++k) {
          const int64_t idx = base + k * l.inner;
          gx[idx] += s[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  const Shape& s = x.shape();
  const int64_t C = s.c(), P = s.plane();
  if (gamma.value().numel() != C || beta.value().numel() != C) {
    throw ShapeError("layer_norm: gamma/beta length must equal channels " + std::to_string(C));
  }
  Tensor<T> y(s);
  Tensor<T> xhat(s);
  Tensor<T> inv_std(Shape(s.n(), 1, s.h(), s.w()));
  const T* xp = x.value().ptr();
  const T* gp = gamma.value().ptr();
  const T* bp = beta.value().ptr();
  T* yp = y.mutable_ptr();
  T* hp = xhat.mutable_ptr();
  T* ip = inv_std.mutable_ptr();
  std::vector<T> mu(static_cast<size_t>(P)), var(static_cast<size_t>(P));
  for (int64_t n = 0; n < s.n(); ++n) {
    const T* xs = xp + n * C * P;
    std::fill(mu.begin(), mu.end(), T(0));
    std::fill(var.begin(), var.end(), T(0));
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t p = 0; p < P; ++p) mu[p] += xs[c * P + p];
    }
    for (int64_t p = 0; p < P; ++p) mu[p] /= static_cast<T>(C);
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t p = 0; p < P; ++p) {
        const T d = xs[c * P + p] - mu[p];
        var[p] += d * d;
      }
    }
    for (int64_t p = 0; p < P; ++p) {
      ip[n * P + p] = T(1) / std::sqrt(var[p] / static_cast<T>(C) + static_cast<T>(eps));
    }
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t p = 0; p < P; ++p) {
        const int64_t idx = (n * C + c) * P + p;
        hp[idx] = (xs[c * P + p] - mu[p]) * ip[n * P + p];
        yp[idx] = gp[c] * hp[idx] + bp[c];
      }
    }
  }
  Tensor<T> gv = gamma.value();
  return finish<T>(OpKind::layer_norm, std::move(y), {x, gamma, beta},
                   [xhat, inv_std, gv, C, P](const Tensor<T>& gy, Grads<T> gin) {
                     const T* g = gy.ptr();
                     const T* h = xhat.ptr();
                     const T* iv = inv_std.ptr();
                     const T* gam = gv.ptr();
                     const int64_t N = gy.shape().n();
                     if (gin[1] != nullptr || gin[2] != nullptr) {
                       for (int64_t n = 0; n < N; ++n) {
                         for (int64_t c = 0; c < C; ++c) {
                           T sg = 0, sgh = 0;
                           for (int64_t p = 0; p < P; ++p) {
                             const int64_t idx = (n * C + c) * P + p;
                             sg += g[idx];
                             sgh += g[idx] * h[idx];
                           }
                           if (gin[1] != nullptr) gin[1]->mutable_ptr()[c] += sgh;
                           if (gin[2] != nullptr) gin[2]->mutable_ptr()[c] += sg;
                         }
                       }
                     }
                     if (gin[0] == nullptr) return;
                     T* gx = gin[0]->mutable_ptr();
                     std::vector<T> m1(static_cast<size_t>(P)), m2(static_cast<size_t>(P));
                     for (int64_t n = 0; n < N; ++n) {
                       std::fill(m1.begin(), m1.end(), T(0));
                       std::fill(m2.begin(), m2.end(), T(0));
                       for (int64_t c = 0; c < C; ++c) {
                         for (int64_t p = 0; p < P; ++p) {
                           const int64_t idx = (n * C + c) * P + p;
                           const T gh = g[idx] * gam[c];
                           m1[p] += gh;
                           m2[p] += gh * h[idx];
                         }
                       }
                       for (int64_t c = 0; c < C; ++c) {
                         for (int64_t p = 0; p < P; ++p) {
                           const int64_t idx = (n * C + c) * P + p;
                           const T gh = g[idx] * gam[c];
                           gx[idx] += iv[n * P + p] *
                                      (gh - m1[p] / static_cast<T>(C) - h[idx] * m2[p] / static_cast<T>(C));
                         }
                       }
                     }
                   });
}

template <typename T>
Var<T> channel_pool(const Var<T>& x, PoolKind kind) {
  const Shape& s = x.shape();
  const int64_t C = s.c(), P = s.plane();
  if (C < 1) throw ShapeError("channel_pool: input has no channels");
  Tensor<T> y(Shape(s.n(), 1, s.h(), s.w()));
  const T* xp = x.value().ptr();
  T* yp = y.mutable_ptr();
  if (kind == PoolKind::avg) {
    for (int64_t n = 0; n < s.n(); ++n) {
      for (int64_t p = 0; p < P; ++p) {
        T acc = 0;
        for (int64_t c = 0; c < C; ++c) acc += xp[(n * C + c) * P + p];
        yp[n * P + p] = acc / static_cast<T>(C);
      }
    }
    return finish<T>(OpKind::channel_pool_avg, std::move(y), {x}, [C, P](const Tensor<T>& gy, Grads<T> gin) {
      T* gx = gin[0]->mutable_ptr();
      const T* g = gy.ptr();
      const int64_t N = gy.shape().n();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t c = 0; c < C; ++c) {
          for (int64_t p = 0; p < P; ++p) gx[(n * C + c) * P + p] += g[n * P + p] / static_cast<T>(C);
        }
      }
    });
  }
  std::vector<int32_t> arg(static_cast<size_t>(s.n() * P));
  for (int64_t n = 0; n < s.n(); ++n) {
    for (int64_t p = 0; p < P; ++p) {
      int32_t best = 0;
      T mx = xp[n * C * P + p];
      for (int64_t c = 1; c < C; ++c) {
        const T v = xp[(n * C + c) * P + p];
        if (v > mx) {
          mx = v;
          best = static_cast<int32_t>(c);
        }
      }
      yp[n * P + p] = mx;
      arg[static_cast<size_t>(n * P + p)] = best;
    }
  }
  return finish<T>(OpKind::channel_pool_max, std::move(y), {x},
                   [arg = std::move(arg), C, P](const Tensor<T>& gy, Grads<T> gin) {
                     T* gx = gin[0]->mutable_ptr();
                     const T* g = gy.ptr();
                     for (size_t i = 0; i < arg.size(); ++i) {
                       const int64_t n = static_cast<int64_t>(i) / P, p = static_cast<int64_t>(i) % P;
                       gx[(n * C + arg[i]) * P + p] += g[i];
                     }
                   });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = parts[0].shape();
  int64_t C = 0;
  for (const auto& v : parts) {
    const Shape& s = v.shape();
    if (s.n() != first.n() || s.h() != first.h() || s.w() != first.w()) {
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " + first.str());
    }
    C += s.c();
  }
  const int64_t P = first.plane();
  Tensor<T> y(Shape(first.n(), C, first.h(), first.w()));
  std::vector<int64_t> sizes;
  int64_t off = 0;
  for (const auto& v : parts) {
    const int64_t ci = v.shape().c();
    for (int64_t n = 0; n < first.n(); ++n) {
      std::copy_n(v.value().ptr() + n * ci * P, ci * P, y.mutable_ptr() + (n * C + off) * P);
    }
    sizes.push_back(ci);
    off += ci;
  }
  if (!y.all_finite()) throw NumericError("non-finite value produced by concat");
  Tape<T>* tape = nullptr;
  for (const auto& v : parts) {
    if (v.tape() != nullptr && v.requires_grad()) tape = v.tape();
  }
  if (tape == nullptr) return Var<T>(std::move(y));
  return tape->record(OpKind::concat, std::move(y), parts, [sizes, C, P](const Tensor<T>& gy, Grads<T> gin) {
    int64_t o = 0;
    const int64_t N = gy.shape().n();
    for (size_t i = 0; i < sizes.size(); ++i) {
      if (gin[i] != nullptr) {
        T* gx = gin[i]->mutable_ptr();
        for (int64_t n = 0; n < N; ++n) {
          const T* src = gy.ptr() + (n * C + o) * P;
          T* dst = gx + n * sizes[i] * P;
          for (int64_t k = 0; k < sizes[i] * P; ++k) dst[k] += src[k];
        }
      }
      o += sizes[i];
    }
  });
}

template <typename T>
std::vector<Var<T>> split_channels(const Var<T>& x, std::span<const int64_t> sizes) {
  const Shape& s = x.shape();
  int64_t total = 0;
  for (auto c : sizes) {
    if (c <= 0) throw ShapeError("split_channels: sizes must be positive");
    total += c;
  }
  if (total != s.c()) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but input has " +
                     std::to_string(s.c()) + " channels");
  }
  const int64_t P = s.plane(), C = s.c();
  std::vector<Var<T>> outs;
  int64_t off = 0;
  for (auto ci : sizes) {
    Tensor<T> y(Shape(s.n(), ci, s.h(), s.w()));
    for (int64_t n = 0; n < s.n(); ++n) {
      std::copy_n(x.value().ptr() + (n * C + off) * P, ci * P, y.mutable_ptr() + n * ci * P);
    }
    outs.push_back(finish<T>(OpKind::split, std::move(y), {x}, [off, ci, C, P](const Tensor<T>& gy, Grads<T> gin) {
      const int64_t N = gy.shape().n();
      T* gx = gin[0]->mutable_ptr();
      for (int64_t n = 0; n < N; ++n) {
        const T* src = gy.ptr() + n * ci * P;
        T* dst = gx + (n * C + off) * P;
        for (int64_t k = 0; k < ci * P; ++k) dst[k] += src[k];
      }
    }));
    off += ci;
  }
  return outs;
}

template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  Tensor<T> y = x.value().reshaped(shape);
  const Shape in = x.shape();
  return finish<T>(OpKind::reshape, std::move(y), {x},
                   [in](const Tensor<T>& gy, Grads<T> gin) { add_into(*gin[0], gy.reshaped(in)); });
}

template <typename T>
Var<T> permute(const Var<T>& x, std::array<int, 4> perm) {
  std::array<bool, 4> seen{};
  for (int p : perm) {
    if (p < 0 || p > 3 || seen[static_cast<size_t>(p)]) throw ShapeError("permute: not a permutation of 0..3");
    seen[static_cast<size_t>(p)] = true;
  }
  const Shape& s = x.shape();
  const std::array<int64_t, 4> in_strides{s[1] * s[2] * s[3], s[2] * s[3], s[3], 1};
  Shape os(s[perm[0]], s[perm[1]], s[perm[2]], s[perm[3]]);
  std::array<int64_t, 4> st{};
  for (int k = 0; k < 4; ++k) st[static_cast<size_t>(k)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(k)])];
  auto gather = [os, st](const T* src, T* dst, bool accumulate_back) {
    int64_t o = 0;
    for (int64_t a = 0; a < os[0]; ++a) {
      for (int64_t b = 0; b < os[1]; ++b) {
        for (int64_t c = 0; c < os[2]; ++c) {
          const int64_t base = a * st[0] + b * st[1] + c * st[2];
          for (int64_t d = 0; d < os[3]; ++d, ++o) {
            if (accumulate_back) {
              dst[base + d * st[3]] += src[o];
            } else {
              dst[o] = src[base + d * st[3]];
            }
          }
        }
      }
    }
  };
  Tensor<T> y(os);
  gather(x.value().ptr(), y.mutable_ptr(), false);
  return finish<T>(OpKind::permute, std::move(y), {x}, [gather](const Tensor<T>& gy, Grads<T> gin) {
    gather(gy.ptr(), gin[0]->mutable_ptr(), true);
  });
}

namespace {

enum class Binary { add, sub, mul };

template <typename T>
Var<T> binary(const Var<T>& a, const Var<T>& b, Binary kind) {
  const char* name = kind == Binary::add ? "add" : kind == Binary::sub ? "sub" : "mul";
  require_defined(a.defined() && b.defined(), name, "operand");
  const Bcast mode = broadcast_mode(a.shape(), b.shape(), name);
  const Shape os = broadcast_shape(a.shape(), b.shape(), mode);
  Tensor<T> y(os);
  const T* ap = a.value().ptr();
  const T* bp = b.value().ptr();
  T* yp = y.mutable_ptr();
  switch (kind) {
    case Binary::add:
      for_each_pair(os, mode, [&](int64_t o, int64_t i, int64_t j) { yp[o] = ap[i] + bp[j]; });
      break;
    case Binary::sub:
      for_each_pair(os, mode, [&](int64_t o, int64_t i, int64_t j) { yp[o] = ap[i] - bp[j]; });
      break;
    case Binary::mul:
      for_each_pair(os, mode, [&](int64_t o, int64_t i, int64_t j) { yp[o] = ap[i] * bp[j]; });
      break;
  }
  const OpKind op = kind == Binary::add ? OpKind::add : kind == Binary::sub ? OpKind::sub : OpKind::mul;
  Tensor<T> av = a.value(), bv = b.value();
  return finish<T>(op, std::move(y), {a, b}, [av, bv, os, mode, kind](const Tensor<T>& gy, Grads<T> gin) {
    const T* g = gy.ptr();
    T* ga = gin[0] != nullptr ? gin[0]->mutable_ptr() : nullptr;
    T* gb = gin[1] != nullptr ? gin[1]->mutable_ptr() : nullptr;
    const T* ap = av.ptr();
    const T* bp = bv.ptr();
    for_each_pair(os, mode, [&](int64_t o, int64_t i, int64_t j) {
      switch (kind) {
        case Binary::add:
          if (ga) ga[i] += g[o];
          if (gb) gb[j] += g[o];
          break;
        case Binary::sub:
          if (ga) ga[i] += g[o];
          if (gb) gb[j] -= g[o];
          break;
        case Binary::mul:
          if (ga) ga[i] += g[o] * bp[j];
          if (gb) gb[j] += g[o] * ap[i];
          break;
      }
    });
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, Binary::add);
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, Binary::sub);
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, Binary::mul);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> y(x.shape());
  auto xs = x.value().data();
  auto ys = y.mutable_data();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = T(1) / (T(1) + std::exp(-xs[i]));
  Tensor<T> yv = y;
  return finish<T>(OpKind::sigmoid, std::move(y), {x}, [yv](const Tensor<T>& gy, Grads<T> gin) {
    auto s = yv.data();
    auto g = gy.data();
    auto gx = gin[0]->mutable_data();
    for (size_t i = 0; i < s.size(); ++i) gx[i] += g[i] * s[i] * (T(1) - s[i]);
  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  Tensor<T> y(x.shape());
  auto xs = x.value().data();
  auto ys = y.mutable_data();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = static_cast<T>(gelu_value(xs[i]));
  Tensor<T> xv = x.value();
  return finish<T>(OpKind::gelu, std::move(y), {x}, [xv](const Tensor<T>& gy, Grads<T> gin) {
    auto xs = xv.data();
    auto g = gy.data();
    auto gx = gin[0]->mutable_data();
    for (size_t i = 0; i < xs.size(); ++i) gx[i] += g[i] * static_cast<T>(gelu_derivative(xs[i]));
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, double factor) {
  const T f = static_cast<T>(factor);
  Tensor<T> y(x.shape());
  auto xs = x.value().data();
  auto ys = y.mutable_data();
  for (size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * f;
  return finish<T>(OpKind::scale, std::move(y), {x}, [f](const Tensor<T>& gy, Grads<T> gin) {
    auto g = gy.data();
    auto gx = gin[0]->mutable_data();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * f;
  });
}

namespace {

template <typename T>
double accumulate(std::span<const T> xs, bool absolute) {
  double acc = 0.0;
  for (T v : xs) acc += absolute ? std::abs(static_cast<double>(v)) : static_cast<double>(v);
  return acc;
}

}  // namespace

template <typename T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(accumulate(x.value().data(), false)));
  return finish<T>(OpKind::sum, std::move(y), {x}, [](const Tensor<T>& gy, Grads<T> gin) {
    const T g = gy.item();
    for (T& v : gin[0]->mutable_data()) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const double n = static_cast<double>(x.value().numel());
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(accumulate(x.value().data(), false) / n));
  return finish<T>(OpKind::mean, std::move(y), {x}, [n](const Tensor<T>& gy, Grads<T> gin) {
    const T g = static_cast<T>(gy.item() / n);
    for (T& v : gin[0]->mutable_data()) v += g;
  });
}

template <typename T>
Var<T> mean_abs(const Var<T>& x) {
  const double n = static_cast<double>(x.value().numel());
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(accumulate(x.value().data(), true) / n));
  Tensor<T> xv = x.value();
  return finish<T>(OpKind::mean_abs, std::move(y), {x}, [xv, n](const Tensor<T>& gy, Grads<T> gin) {
    const T g = static_cast<T>(gy.item() / n);
    auto xs = xv.data();
    auto gx = gin[0]->mutable_data();
    for (size_t i = 0; i < xs.size(); ++i) gx[i] += xs[i] > T(0) ? g : (xs[i] < T(0) ? -g : T(0));
  });
}

template <typename T>
Var<T> spatial_mean(const Var<T>& x) {
  const Shape& s = x.shape();
  const int64_t P = s.plane();
  Tensor<T> y(Shape(s.n(), s.c(), 1, 1));
  for (int64_t i = 0; i < s.n() * s.c(); ++i) {
    y.mutable_ptr()[i] =
        static_cast<T>(accumulate(std::span<const T>(x.value().ptr() + i * P, static_cast<size_t>(P)), false) /
                       static_cast<double>(P));
  }
  return finish<T>(OpKind::spatial_mean, std::move(y), {x}, [P](const Tensor<T>& gy, Grads<T> gin) {
    T* gx = gin[0]->mutable_ptr();
    for (int64_t i = 0; i < gy.numel(); ++i) {
      const T g = gy.ptr()[i] / static_cast<T>(P);
      for (int64_t p = 0; p < P; ++p) gx[i * P + p] += g;
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& x, int target, double clamp) {
  const Shape& s = x.shape();
  if (s.c() != 1 || s.h() != 1 || s.w() != 1) {
    throw ShapeError("bce_with_logits expects (N,1,1,1) logits, got " + s.str());
  }
  if (target != 0 && target != 1) throw ShapeError("bce_with_logits: target must be 0 or 1");
  if (!x.value().all_finite()) throw NumericError("bce_with_logits: non-finite logits");
  const int64_t N = s.n();
  double total = 0.0;
  std::vector<double> probs(static_cast<size_t>(N));
  for (int64_t i = 0; i < N; ++i) {
    const double z = static_cast<double>(x.value().ptr()[i]);
    const double p = 1.0 / (1.0 + std::exp(-z));
    probs[static_cast<size_t>(i)] = p;
    const double pc = std::clamp(p, clamp, 1.0 - clamp);
    total += target == 1 ? -std::log(pc) : -std::log(1.0 - pc);
  }
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(N)));
  return finish<T>(OpKind::bce_logits, std::move(y), {x},
                   [probs = std::move(probs), target, clamp, N](const Tensor<T>& gy, Grads<T> gin) {
                     const double g = static_cast<double>(gy.item()) / static_cast<double>(N);
                     T* gx = gin[0]->mutable_ptr();
                     for (int64_t i = 0; i < N; ++i) {
                       const double p = probs[static_cast<size_t>(i)];
                       if (p < clamp || p > 1.0 - clamp) continue;  // clamped: flat
                       gx[i] += static_cast<T>(g * (target == 1 ? p - 1.0 : p));
                     }
                   });
}

#define AMISR_INSTANTIATE(T)                                                                             \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, Conv2dOptions);                    \
  template Var<T> transposed_conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int64_t, int64_t);     \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> softmax(const Var<T>&, int);                                                           \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);                       \
  template Var<T> channel_pool(const Var<T>&, PoolKind);                                                 \
  template Var<T> concat_channels(std::span<const Var<T>>);                                              \
  template std::vector<Var<T>> split_channels(const Var<T>&, std::span<const int64_t>);                  \
  template Var<T> reshape(const Var<T>&, const Shape&);                                                  \
  template Var<T> permute(const Var<T>&, std::array<int, 4>);                                            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> sigmoid(const Var<T>&);                                                                \
  template Var<T> gelu(const Var<T>&);                                                                   \
  template Var<T> scale(const Var<T>&, double);                                                          \
  template Var<T> sum(const Var<T>&);                                                                    \
  template Var<T> mean(const Var<T>&);                                                                   \
  template Var<T> mean_abs(const Var<T>&);                                                               \
  template Var<T> spatial_mean(const Var<T>&);                                                           \
  template Var<T> bce_with_logits(const Var<T>&, int, double);

AMISR_INSTANTIATE(float)
AMISR_INSTANTIATE(double)

#undef AMISR_INSTANTIATE

}  // namespace amisr::ops
