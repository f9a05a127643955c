#pragma once

// Differentiable operations over Var. When an input lives on a tape and
// requires a gradient, the op records itself with its adjoint; otherwise it
// evaluates eagerly and returns a constant Var. Every op output is checked
// for NaN/Inf and a NumericError naming the op is thrown on failure.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "amisr/tape.hpp"

namespace amisr::ops {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

// "Same" padding for an odd kernel at stride 1.
inline Conv2dOptions same(int kernel, int groups = 1) { return {1, kernel / 2, groups}; }

enum class PoolKind { avg, max };

// Cross-correlation with zero padding. w is (C_out, C_in/groups, kh, kw);
// `bias` may be an undefined Var.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, Conv2dOptions opts = {});

// Stride-2, kernel-2 transposed convolution. w is (C_in, C_out, 2, 2).
// out_h/out_w default to 2H/2W and may be 2H-1/2W-1.
template <typename T>
Var<T> transposed_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int64_t out_h = 0,
                         int64_t out_w = 0);

// Batched over the leading (N, C) extents: (N,C,M,K) x (N,C,K,P).
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> softmax(const Var<T>& x, int axis);

// Normalizes over channels at every (n, h, w); gamma/beta hold C values.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-6);

// Mean or max across channels -> (N, 1, H, W). Max routes the gradient to
// the first maximal channel.
template <typename T>
Var<T> channel_pool(const Var<T>& x, PoolKind kind);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);

template <typename T>
std::vector<Var<T>> split_channels(const Var<T>& x, std::span<const int64_t> sizes);

template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape);

// out.dims[i] = in.dims[perm[i]]
template <typename T>
Var<T> permute(const Var<T>& x, std::array<int, 4> perm);

// Binary ops take equal shapes, or one operand with C=1 broadcast across
// the other's channels.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sigmoid(const Var<T>& x);
// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
template <typename T>
Var<T> gelu(const Var<T>& x);
template <typename T>
Var<T> scale(const Var<T>& x, double factor);

// Scalar reductions -> shape (1,1,1,1). Accumulation runs in double in
// index order.
template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
template <typename T>
Var<T> mean_abs(const Var<T>& x);

// Mean over H and W -> (N, C, 1, 1).
template <typename T>
Var<T> spatial_mean(const Var<T>& x);

// Mean over the batch of -log(p) (target 1) or -log(1-p) (target 0) where
// p = clamp(sigmoid(logit), clamp, 1-clamp). x is (N,1,1,1).
template <typename T>
Var<T> bce_with_logits(const Var<T>& x, int target, double clamp = 1e-7);

template <typename T>
inline Var<T> operator+(const Var<T>& a, const Var<T>& b) {
  return add(a, b);
}
template <typename T>
inline Var<T> operator-(const Var<T>& a, const Var<T>& b) {
  return sub(a, b);
}
template <typename T>
inline Var<T> operator*(const Var<T>& a, const Var<T>& b) {
  return mul(a, b);
}

// Scalar helpers used by oracles and the engine alike.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace amisr::ops
