#pragma once

// Raw tensor kernels behind the differentiable ops. Backward routines
// accumulate (+=) into whichever gradient outputs are non-null.

#include <cstdint>

#include "amisr/tensor.hpp"

namespace amisr::kernels {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

int64_t conv_output_extent(int64_t in, int64_t kernel, int stride, int padding);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, ConvGeometry g);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y, ConvGeometry g,
                     Tensor<T>* grad_x, Tensor<T>* grad_w, Tensor<T>* grad_b);

// Kernel 2, stride 2. out_h/out_w of 0 mean 2H/2W; 2H-1 / 2W-1 crop the last
// row/column so odd encoder extents can be restored.
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int64_t out_h,
                            int64_t out_w);

template <typename T>
void transposed_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y,
                                Tensor<T>* grad_x, Tensor<T>* grad_w, Tensor<T>* grad_b);

// (N,C,M,K) x (N,C,K,P) -> (N,C,M,P)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& grad_y, Tensor<T>* grad_a,
                     Tensor<T>* grad_b);

// Multiply-accumulate counter covering conv2d, transposed_conv2d and matmul
// forward calls on this thread.
uint64_t mac_count();
void reset_mac_count();

}  // namespace amisr::kernels
