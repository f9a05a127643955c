#include "amisr/losses.hpp"

#include "amisr/checkpoint.hpp"
#include "amisr/errors.hpp"

namespace amisr {

template <typename T>
Var<T> pixel_loss(const Var<T>& sr, const Var<T>& hr) {
  if (sr.shape() != hr.shape()) {
    throw ShapeError("pixel_loss: " + sr.shape().str() + " vs " + hr.shape().str());
  }
  return ops::mean_abs(ops::sub(sr, hr));
}

template <typename T>
ParamSpecs PerceptualProxy<T>::layout() {
  return {{"pcp.l1.w", Shape(16, 3, 3, 3), InitScheme::he},   {"pcp.l1.b", Shape(1, 16, 1, 1), InitScheme::zeros},
          {"pcp.l2.w", Shape(32, 16, 3, 3), InitScheme::he},  {"pcp.l2.b", Shape(1, 32, 1, 1), InitScheme::zeros},
          {"pcp.l3.w", Shape(64, 32, 3, 3), InitScheme::he},  {"pcp.l3.b", Shape(1, 64, 1, 1), InitScheme::zeros}};
}

template <typename T>
PerceptualProxy<T>::PerceptualProxy(uint64_t seed) {
  Rng rng(seed);
  weights_ = allocate<T>(layout(), rng);
}

template <typename T>
PerceptualProxy<T> PerceptualProxy<T>::load(const std::filesystem::path& path) {
  PerceptualProxy p{Empty{}};
  p.weights_ = decode_store<T>(read_file_bytes(path));
  const ParamSpecs specs = layout();
  if (p.weights_.size() != specs.size()) throw FormatError("perceptual weights: expected 6 tensors");
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& e = p.weights_.entries()[i];
    if (e.name != specs[i].name || e.value.shape() != specs[i].shape) {
      throw FormatError("perceptual weights: tensor '" + e.name + "' does not match the extractor layout");
    }
  }
  return p;
}

template <typename T>
void PerceptualProxy<T>::save(const std::filesystem::path& path) const {
  write_file_bytes(path, encode_store(weights_, nlohmann::json{{"perceptual_proxy", true}}));
}

template <typename T>
std::vector<Var<T>> PerceptualProxy<T>::features(const Var<T>& x) const {
  Binder<T> b(weights_, nullptr, false);
  std::vector<Var<T>> out;
  Var<T> h = x;
  for (const char* l : {"pcp.l1", "pcp.l2", "pcp.l3"}) {
    h = ops::gelu(ops::conv2d(h, b(std::string(l) + ".w"), b(std::string(l) + ".b"), {2, 1, 1}));
    out.push_back(h);
  }
  return out;
}

template <typename T>
Var<T> PerceptualProxy<T>::loss(const Var<T>& sr, const Var<T>& hr) const {
  if (sr.shape() != hr.shape()) {
    throw ShapeError("perceptual_loss: " + sr.shape().str() + " vs " + hr.shape().str());
  }
  const auto fs = features(sr);
  const auto fh = features(hr);
  Var<T> total = ops::mean_abs(ops::sub(fs[0], fh[0]));
  for (size_t l = 1; l < fs.size(); ++l) total = ops::add(total, ops::mean_abs(ops::sub(fs[l], fh[l])));
  return total;
}

template <typename T>
Var<T> discriminator_loss(const Var<T>& logits_real, const Var<T>& logits_fake) {
  return ops::add(ops::bce_with_logits(logits_real, 1), ops::bce_with_logits(logits_fake, 0));
}

template <typename T>
Var<T> generator_adversarial_loss(const Var<T>& logits_fake) {
  return ops::bce_with_logits(logits_fake, 1);
}

template <typename T>
Var<T> total_loss(const LossParts<T>& parts, const LossWeights& w) {
  Var<T> total;
  auto accumulate = [&](const Var<T>& part, double weight) {
    if (!part.defined()) return;
    const Var<T> term = ops::scale(part, weight);
    total = total.defined() ? ops::add(total, term) : term;
  };
  accumulate(parts.pix, w.pix);
  accumulate(parts.pcp, w.pcp);
  accumulate(parts.adv, w.adv);
  if (!total.defined()) throw ConfigError("total_loss: no loss parts");
  return total;
}

double total_loss_value(double pix, double pcp, double adv, const LossWeights& w) {
  return w.pix * pix + w.pcp * pcp + w.adv * adv;
}

#define AMISR_INSTANTIATE(T)                                                          \
  template Var<T> pixel_loss(const Var<T>&, const Var<T>&);                           \
  template class PerceptualProxy<T>;                                                  \
  template Var<T> discriminator_loss(const Var<T>&, const Var<T>&);                   \
  template Var<T> generator_adversarial_loss(const Var<T>&);                          \
  template Var<T> total_loss(const LossParts<T>&, const LossWeights&);

AMISR_INSTANTIATE(float)
AMISR_INSTANTIATE(double)

#undef AMISR_INSTANTIATE

}  // namespace amisr
