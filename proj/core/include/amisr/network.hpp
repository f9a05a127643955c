#pragma once

// The full U-shaped network: stem conv, three encoder stages (LGFI then a
// strided downsample), two bottleneck LGFIs, three decoder stages (upsample,
// EDFF with the matching encoder feature, LGFI) and an output conv added to
// the input image.
//
// Parameter names:
//   stem.{w,b}
//   enc{1,2,3}.lgfi.*  enc{1,2,3}.down.conv.{w,b}
//   bottleneck.lgfi{1,2}.*
//   dec{1,2,3}.up.conv.{w,b}  dec{1,2,3}.edff.*  dec{1,2,3}.lgfi.*
//   out.{w,b}
// dec1 is the deepest decoder (8C -> 4C).

#include <array>
#include <cstdint>

#include "amisr/arch_config.hpp"
#include "amisr/blocks.hpp"
#include "amisr/params.hpp"

namespace amisr {

ParamSpecs declare_network(const ArchConfig& cfg);

// He init for conv kernels, zero biases, unit norm gains; the output conv
// starts at zero so the untrained network is the identity.
template <typename T>
ParamStore<T> build(const ArchConfig& cfg, Rng& rng);

// Shapes of F1..F7: encoder outputs F1-F3, bottleneck F4, decoder outputs F5-F7.
struct FeatureTrace {
  std::array<Shape, 7> f;
};

template <typename T>
Var<T> forward(const ArchConfig& cfg, Binder<T>& params, const Var<T>& x, FeatureTrace* trace = nullptr);

// Tape-free forward with constant parameters.
template <typename T>
Tensor<T> infer(const ArchConfig& cfg, ParamStore<T>& params, const Tensor<T>& x);

// Learnable scalars of the configured network.
int64_t param_count(const ArchConfig& cfg);

// Multiply-accumulates of one forward pass for a single image, summed over
// every conv, transposed conv and matmul.
int64_t mac_estimate(const ArchConfig& cfg);

}  // namespace amisr
