#pragma once

#include <filesystem>

#include "amisr/ops.hpp"
#include "amisr/params.hpp"

namespace amisr {

struct LossWeights {
  double pix = 1.0;
  double pcp = 0.01;
  double adv = 0.01;
  bool operator==(const LossWeights&) const = default;
};

// Mean absolute difference.
template <typename T>
Var<T> pixel_loss(const Var<T>& sr, const Var<T>& hr);

// Fixed feature extractor standing in for a pretrained network: three
// stride-2 3x3 convs (3->16->32->64), each followed by GELU. Weights are
// He-initialized from a pinned seed and never trained.
template <typename T>
class PerceptualProxy {
 public:
  static constexpr uint64_t kDefaultSeed = 0x5eed'f00d;

  explicit PerceptualProxy(uint64_t seed = kDefaultSeed);
  // Loads weights saved with save(); names and shapes must match the layout.
  static PerceptualProxy load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<Var<T>> features(const Var<T>& x) const;
  // sum over layers of mean |f_l(sr) - f_l(hr)|
  Var<T> loss(const Var<T>& sr, const Var<T>& hr) const;

  const ParamStore<T>& weights() const { return weights_; }
  static ParamSpecs layout();

 private:
  struct Empty {};
  explicit PerceptualProxy(Empty) {}
  // Binding never writes, but Binder takes a mutable store.
  mutable ParamStore<T> weights_;
};

// Discriminator logits, mean-reduced to (N,1,1,1) before the BCE.
// L_dis = -E[log D(hr)] - E[log(1 - D(sr))]
template <typename T>
Var<T> discriminator_loss(const Var<T>& logits_real, const Var<T>& logits_fake);
// L_adv = -E[log D(sr)]
template <typename T>
Var<T> generator_adversarial_loss(const Var<T>& logits_fake);

template <typename T>
struct LossParts {
  Var<T> pix, pcp, adv;
};

// w.pix * pix + w.pcp * pcp + w.adv * adv over the parts that are defined.
template <typename T>
Var<T> total_loss(const LossParts<T>& parts, const LossWeights& w);

double total_loss_value(double pix, double pcp, double adv, const LossWeights& w);

}  // namespace amisr
