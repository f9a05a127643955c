#include "amisr/discriminator.hpp"

#include "amisr/blocks.hpp"
#include "amisr/errors.hpp"
#include "amisr/ops.hpp"

namespace amisr {

namespace {
constexpr int64_t kWidths[5] = {3, 32, 64, 128, 256};
}

ParamSpecs declare_discriminator() {
  ParamSpecs specs;
  for (int i = 0; i < 4; ++i) {
    blocks::declare_conv(specs, "disc.c" + std::to_string(i + 1), kWidths[i + 1], kWidths[i], 3);
  }
  blocks::declare_conv(specs, "disc.head", 1, kWidths[4], 3);
  return specs;
}

template <typename T>
ParamStore<T> build_discriminator(Rng& rng) {
  return allocate<T>(declare_discriminator(), rng);
}

template <typename T>
Var<T> discriminator_map(Binder<T>& params, const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.c() != 3 || s.h() % 16 != 0 || s.w() % 16 != 0) {
    throw ShapeError("discriminator expects (N,3,H,W) with H, W divisible by 16, got " + s.str());
  }
  Var<T> h = x;
  for (int i = 1; i <= 4; ++i) {
    const std::string n = "disc.c" + std::to_string(i);
    h = ops::gelu(ops::conv2d(h, params(n + ".w"), params(n + ".b"), {2, 1, 1}));
  }
  return ops::conv2d(h, params("disc.head.w"), params("disc.head.b"), ops::same(3));
}

template <typename T>
Var<T> discriminator_logits(Binder<T>& params, const Var<T>& x) {
  return ops::spatial_mean(discriminator_map(params, x));
}

template ParamStore<float> build_discriminator(Rng&);
template ParamStore<double> build_discriminator(Rng&);
template Var<float> discriminator_map(Binder<float>&, const Var<float>&);
template Var<double> discriminator_map(Binder<double>&, const Var<double>&);
template Var<float> discriminator_logits(Binder<float>&, const Var<float>&);
template Var<double> discriminator_logits(Binder<double>&, const Var<double>&);

}  // namespace amisr
