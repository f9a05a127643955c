#include "amisr/blocks.hpp"

#include <cmath>

#include "amisr/errors.hpp"

namespace amisr::blocks {

using ops::Conv2dOptions;

std::string to_string(SkafPool pool) {
  switch (pool) {
    case SkafPool::both:
      return "both";
    case SkafPool::avg:
      return "avg";
    case SkafPool::max:
      return "max";
  }
  return "both";
}

SkafPool skaf_pool_from_string(const std::string& name) {
  if (name == "both") return SkafPool::both;
  if (name == "avg") return SkafPool::avg;
  if (name == "max") return SkafPool::max;
  throw ConfigError("unknown skaf_pool '" + name + "' (expected avg, max or both)");
}

void declare_conv(ParamSpecs& specs, const std::string& name, int64_t cout, int64_t cin_per_group, int64_t k,
                  InitScheme init) {
  specs.push_back({name + ".w", Shape(cout, cin_per_group, k, k), init});
  specs.push_back({name + ".b", Shape(1, cout, 1, 1), InitScheme::zeros});
}

void declare_norm(ParamSpecs& specs, const std::string& name, int64_t channels) {
  specs.push_back({name + ".gamma", Shape(1, channels, 1, 1), InitScheme::ones});
  specs.push_back({name + ".beta", Shape(1, channels, 1, 1), InitScheme::zeros});
}

void declare_sa(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  for (const char* n : {"q", "k", "v"}) declare_conv(specs, prefix + "." + n + "_pw", c, c, 1);
  for (const char* n : {"q", "k", "v"}) declare_conv(specs, prefix + "." + n + "_dw", c, 1, 3);
  declare_conv(specs, prefix + ".proj", c, c, 1);
}

void declare_rdfe(ParamSpecs& specs, const std::string& prefix, int64_t c, const RdfeOptions& opts) {
  if (opts.au_reduction < 1 || c % opts.au_reduction != 0) {
    throw ConfigError("RDFE attention-unit reduction " + std::to_string(opts.au_reduction) +
                      " does not divide channels " + std::to_string(c));
  }
  const int64_t branches = static_cast<int64_t>(opts.kernels.size());
  for (int k : opts.kernels) declare_conv(specs, prefix + ".dw" + std::to_string(k), c, 1, k);
  const int64_t hidden = c / opts.au_reduction;
  declare_conv(specs, prefix + ".au_squeeze", hidden, branches * c, 1);
  declare_conv(specs, prefix + ".au_expand", c, hidden, 1);
  declare_conv(specs, prefix + ".merge", c, branches * c, 1);
  declare_norm(specs, prefix + ".frm.norm", c);
  declare_conv(specs, prefix + ".frm.conv1", c, c, 3);
  declare_conv(specs, prefix + ".frm.conv2", c, c, 3);
  declare_conv(specs, prefix + ".frm.hg_down", c, c, 3);
  specs.push_back({prefix + ".frm.hg_up.w", Shape(c, c, 2, 2), InitScheme::he_transposed});
  specs.push_back({prefix + ".frm.hg_up.b", Shape(1, c, 1, 1), InitScheme::zeros});
}

void declare_ffn(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  declare_conv(specs, prefix + ".fc1", c, c, 1);
  declare_conv(specs, prefix + ".fc2", c, c, 1);
}

void declare_skaf(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  declare_conv(specs, prefix + ".k5", c, c, 5);
  declare_conv(specs, prefix + ".k7", c, c, 7);
}

void declare_edff(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  declare_conv(specs, prefix + ".reduce", c, 2 * c, 1);
  declare_skaf(specs, prefix + ".skaf", c);
}

void declare_lgfi(ParamSpecs& specs, const std::string& prefix, int64_t c, const LgfiOptions& opts) {
  if (!opts.use_sa && !opts.use_rdfe && !opts.ffn_instead_of_rdfe) {
    throw ConfigError("LGFI needs at least one of the SA and RDFE branches");
  }
  if (opts.use_sa && (opts.heads < 1 || c % opts.heads != 0)) {
    throw ConfigError("attention heads " + std::to_string(opts.heads) + " do not divide channels " +
                      std::to_string(c));
  }
  declare_norm(specs, prefix + ".norm", c);
  if (opts.use_sa) declare_sa(specs, prefix + ".sa", c);
  if (opts.ffn_instead_of_rdfe) {
    declare_ffn(specs, prefix + ".ffn", c);
  } else if (opts.use_rdfe) {
    declare_rdfe(specs, prefix + ".rdfe", c, opts.rdfe);
  }
  if (opts.use_skaf) declare_skaf(specs, prefix + ".skaf", c);
}

void declare_downsample(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  declare_conv(specs, prefix + ".conv", 2 * c, c, 3);
}

void declare_upsample(ParamSpecs& specs, const std::string& prefix, int64_t c) {
  if (c % 2 != 0) throw ConfigError("upsample needs an even channel count, got " + std::to_string(c));
  specs.push_back({prefix + ".conv.w", Shape(c, c / 2, 2, 2), InitScheme::he_transposed});
  specs.push_back({prefix + ".conv.b", Shape(1, c / 2, 1, 1), InitScheme::zeros});
}

// ---------------------------------------------------------------------------

template <typename T>
ConvParams<T> ConvParams<T>::bind(Binder<T>& binder, const std::string& name) {
  return {binder(name + ".w"), binder(name + ".b")};
}

template <typename T>
NormParams<T> NormParams<T>::bind(Binder<T>& binder, const std::string& name) {
  return {binder(name + ".gamma"), binder(name + ".beta")};
}

template <typename T>
SAParams<T> SAParams<T>::bind(Binder<T>& binder, const std::string& prefix, int heads) {
  SAParams p;
  p.q_pw = ConvParams<T>::bind(binder, prefix + ".q_pw");
  p.k_pw = ConvParams<T>::bind(binder, prefix + ".k_pw");
  p.v_pw = ConvParams<T>::bind(binder, prefix + ".v_pw");
  p.q_dw = ConvParams<T>::bind(binder, prefix + ".q_dw");
  p.k_dw = ConvParams<T>::bind(binder, prefix + ".k_dw");
  p.v_dw = ConvParams<T>::bind(binder, prefix + ".v_dw");
  p.proj = ConvParams<T>::bind(binder, prefix + ".proj");
  p.heads = heads;
  return p;
}

template <typename T>
RDFEParams<T> RDFEParams<T>::bind(Binder<T>& binder, const std::string& prefix, const RdfeOptions& opts) {
  RDFEParams p;
  p.kernels = opts.kernels;
  for (int k : opts.kernels) p.branches.push_back(ConvParams<T>::bind(binder, prefix + ".dw" + std::to_string(k)));
  p.au_squeeze = ConvParams<T>::bind(binder, prefix + ".au_squeeze");
  p.au_expand = ConvParams<T>::bind(binder, prefix + ".au_expand");
  p.merge = ConvParams<T>::bind(binder, prefix + ".merge");
  p.frm_norm = NormParams<T>::bind(binder, prefix + ".frm.norm");
  p.frm_conv1 = ConvParams<T>::bind(binder, prefix + ".frm.conv1");
  p.frm_conv2 = ConvParams<T>::bind(binder, prefix + ".frm.conv2");
  p.hg_down = ConvParams<T>::bind(binder, prefix + ".frm.hg_down");
  p.hg_up = ConvParams<T>::bind(binder, prefix + ".frm.hg_up");
  return p;
}

template <typename T>
FFNParams<T> FFNParams<T>::bind(Binder<T>& binder, const std::string& prefix) {
  return {ConvParams<T>::bind(binder, prefix + ".fc1"), ConvParams<T>::bind(binder, prefix + ".fc2")};
}

template <typename T>
SKAFParams<T> SKAFParams<T>::bind(Binder<T>& binder, const std::string& prefix, SkafPool pool) {
  SKAFParams p;
  p.k5 = ConvParams<T>::bind(binder, prefix + ".k5");
  p.k7 = ConvParams<T>::bind(binder, prefix + ".k7");
  p.pool = pool;
  return p;
}

template <typename T>
EDFFParams<T> EDFFParams<T>::bind(Binder<T>& binder, const std::string& prefix, SkafPool pool) {
  EDFFParams p;
  p.reduce = ConvParams<T>::bind(binder, prefix + ".reduce");
  p.skaf = SKAFParams<T>::bind(binder, prefix + ".skaf", pool);
  return p;
}

template <typename T>
LGFIParams<T> LGFIParams<T>::bind(Binder<T>& binder, const std::string& prefix, const LgfiOptions& opts) {
  LGFIParams p;
  p.norm = NormParams<T>::bind(binder, prefix + ".norm");
  if (opts.use_sa) p.sa = SAParams<T>::bind(binder, prefix + ".sa", opts.heads);
  if (opts.ffn_instead_of_rdfe) {
    p.ffn = FFNParams<T>::bind(binder, prefix + ".ffn");
  } else if (opts.use_rdfe) {
    p.rdfe = RDFEParams<T>::bind(binder, prefix + ".rdfe", opts.rdfe);
  }
  if (opts.use_skaf) p.skaf = SKAFParams<T>::bind(binder, prefix + ".skaf", opts.skaf_pool);
  return p;
}

template <typename T>
ResampleParams<T> ResampleParams<T>::bind(Binder<T>& binder, const std::string& prefix) {
  return {ConvParams<T>::bind(binder, prefix + ".conv")};
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
Var<T> conv(const Var<T>& x, const ConvParams<T>& p, Conv2dOptions opts) {
  return ops::conv2d(x, p.w, p.b, opts);
}

// Square odd kernel at stride 1 with "same" zero padding.
template <typename T>
Var<T> conv_same(const Var<T>& x, const ConvParams<T>& p) {
  return conv(x, p, ops::same(static_cast<int>(p.w.shape().h())));
}

template <typename T>
Var<T> depthwise_same(const Var<T>& x, const ConvParams<T>& p) {
  return conv(x, p, ops::same(static_cast<int>(p.w.shape().h()), static_cast<int>(x.shape().c())));
}

template <typename T>
Var<T> norm(const Var<T>& x, const NormParams<T>& p) {
  return ops::layer_norm(x, p.gamma, p.beta);
}

}  // namespace

template <typename T>
SAOutput<T> sa_forward_detailed(const Var<T>& x, const SAParams<T>& p) {
  const Shape s = x.shape();
  const int64_t C = s.c(), HW = s.plane();
  if (p.heads < 1 || C % p.heads != 0) {
    throw ShapeError("SA: " + std::to_string(p.heads) + " heads do not divide " + std::to_string(C) + " channels");
  }
  if (p.q_pw.w.shape().c() != C) {
    throw ShapeError("SA: input has " + std::to_string(C) + " channels but parameters expect " +
                     std::to_string(p.q_pw.w.shape().c()));
  }
  const int64_t ch = C / p.heads;
  const Shape heads_shape(s.n(), p.heads, ch, HW);

  auto project = [&](const ConvParams<T>& pw, const ConvParams<T>& dw) {
    return depthwise_same(conv(x, pw, Conv2dOptions{}), dw);
  };
  const Var<T> q = ops::reshape(project(p.q_pw, p.q_dw), heads_shape);
  const Var<T> k = ops::reshape(project(p.k_pw, p.k_dw), heads_shape);
  const Var<T> v = ops::reshape(project(p.v_pw, p.v_dw), heads_shape);

  const double d = p.scale_d > 0.0 ? p.scale_d : static_cast<double>(HW);
  if (!(d > 0.0)) throw ShapeError("SA: scale d must be positive");
  const Var<T> kt = ops::permute(k, {0, 1, 3, 2});
  const Var<T> logits = ops::scale(ops::matmul(q, kt), 1.0 / std::sqrt(d));
  const Var<T> attn = ops::softmax(logits, 3);
  const Var<T> weighted = ops::matmul(attn, v);
  const Var<T> out = conv(ops::reshape(weighted, s), p.proj, Conv2dOptions{});
  return {out, attn};
}

template <typename T>
RDFEOutput<T> rdfe_forward_detailed(const Var<T>& x, const RDFEParams<T>& p) {
  const int64_t C = x.shape().c();
  if (p.merge.w.shape().n() != C) throw ShapeError("RDFE: parameters do not match input channels");
  std::vector<Var<T>> feats;
  for (const auto& br : p.branches) feats.push_back(depthwise_same(x, br));

  const Var<T> au_in = ops::concat_channels<T>(feats);
  const Var<T> au = ops::sigmoid(conv(ops::gelu(conv(au_in, p.au_squeeze, {})), p.au_expand, {}));

  std::vector<Var<T>> modulated;
  for (const auto& f : feats) modulated.push_back(ops::mul(f, au));
  const Var<T> fused = ops::add(conv(ops::concat_channels<T>(modulated), p.merge, {}), x);

  // Feature refinement: norm -> conv -> GELU -> conv -> hourglass, with skips.
  const Var<T> refined = conv_same(ops::gelu(conv_same(norm(fused, p.frm_norm), p.frm_conv1)), p.frm_conv2);
  const Var<T> coarse = ops::gelu(conv(refined, p.hg_down, Conv2dOptions{2, 1, 1}));
  const Var<T> restored =
      ops::transposed_conv2d(coarse, p.hg_up.w, p.hg_up.b, refined.shape().h(), refined.shape().w());
  const Var<T> hourglass = ops::add(refined, restored);
  return {ops::add(fused, hourglass), au};
}

template <typename T>
Var<T> ffn_forward(const Var<T>& x, const FFNParams<T>& p) {
  return ops::add(x, conv(ops::gelu(conv(x, p.fc1, {})), p.fc2, {}));
}

template <typename T>
std::pair<Var<T>, Var<T>> skaf_forward(const Var<T>& x, const SKAFParams<T>& p) {
  if (p.k5.w.shape().c() != x.shape().c()) throw ShapeError("SKAF: parameters do not match input channels");
  const Var<T> local = conv_same(x, p.k5);
  const Var<T> context = conv_same(x, p.k7);
  if (p.pool == SkafPool::both) {
    const Var<T> hybrid = ops::concat_channels<T>(std::vector<Var<T>>{local, context});
    const Var<T> pooled = ops::concat_channels<T>(std::vector<Var<T>>{
        ops::channel_pool(hybrid, ops::PoolKind::avg), ops::channel_pool(hybrid, ops::PoolKind::max)});
    const std::vector<int64_t> sizes{1, 1};
    auto maps = ops::split_channels(ops::sigmoid(pooled), sizes);
    return {maps[0], maps[1]};
  }
  // Single-pool ablation: each branch is pooled on its own so two maps remain.
  const auto kind = p.pool == SkafPool::avg ? ops::PoolKind::avg : ops::PoolKind::max;
  return {ops::sigmoid(ops::channel_pool(local, kind)), ops::sigmoid(ops::channel_pool(context, kind))};
}

template <typename T>
Var<T> lgfi_forward(const Var<T>& x, const LGFIParams<T>& p) {
  const Var<T> normed = norm(x, p.norm);
  std::optional<Var<T>> global, local;
  if (p.sa) global = sa_forward(normed, *p.sa);
  if (p.rdfe) {
    local = rdfe_forward(normed, *p.rdfe);
  } else if (p.ffn) {
    local = ffn_forward(normed, *p.ffn);
  }
  if (!global && !local) throw ConfigError("LGFI has neither an SA nor a local branch");

  Var<T> out = x;
  if (p.skaf) {
    const Var<T> mixed = global && local ? ops::add(*global, *local) : (global ? *global : *local);
    const auto [w_global, w_local] = skaf_forward(mixed, *p.skaf);
    if (global) out = ops::add(out, ops::mul(*global, w_global));
    if (local) out = ops::add(out, ops::mul(*local, w_local));
  } else {
    if (global) out = ops::add(out, ops::scale(*global, 0.5));
    if (local) out = ops::add(out, ops::scale(*local, 0.5));
  }
  return out;
}

template <typename T>
Var<T> edff_forward(const Var<T>& x_e, const Var<T>& x_d, const EDFFParams<T>& p) {
  if (x_e.shape() != x_d.shape()) {
    throw ShapeError("EDFF: encoder feature " + x_e.shape().str() + " does not match decoder feature " +
                     x_d.shape().str());
  }
  const Var<T> reduced = conv(ops::concat_channels<T>(std::vector<Var<T>>{x_e, x_d}), p.reduce, {});
  const auto [w_e, w_d] = skaf_forward(reduced, p.skaf);
  return ops::add(ops::mul(x_e, w_e), ops::mul(x_d, w_d));
}

template <typename T>
Var<T> downsample(const Var<T>& x, const ResampleParams<T>& p) {
  const Shape& s = x.shape();
  if (s.h() % 2 != 0 || s.w() % 2 != 0) throw ShapeError("downsample needs even spatial extents, got " + s.str());
  return conv(x, p.conv, Conv2dOptions{2, 1, 1});
}

template <typename T>
Var<T> upsample(const Var<T>& x, const ResampleParams<T>& p) {
  if (x.shape().c() % 2 != 0) throw ShapeError("upsample needs an even channel count, got " + x.shape().str());
  return ops::transposed_conv2d(x, p.conv.w, p.conv.b);
}

#define AMISR_INSTANTIATE(T)                                                                       \
  template struct ConvParams<T>;                                                                   \
  template struct NormParams<T>;                                                                   \
  template struct SAParams<T>;                                                                     \
  template struct RDFEParams<T>;                                                                   \
  template struct FFNParams<T>;                                                                    \
  template struct SKAFParams<T>;                                                                   \
  template struct EDFFParams<T>;                                                                   \
  template struct LGFIParams<T>;                                                                   \
  template struct ResampleParams<T>;                                                               \
  template SAOutput<T> sa_forward_detailed(const Var<T>&, const SAParams<T>&);                     \
  template RDFEOutput<T> rdfe_forward_detailed(const Var<T>&, const RDFEParams<T>&);               \
  template Var<T> ffn_forward(const Var<T>&, const FFNParams<T>&);                                 \
  template std::pair<Var<T>, Var<T>> skaf_forward(const Var<T>&, const SKAFParams<T>&);            \
  template Var<T> lgfi_forward(const Var<T>&, const LGFIParams<T>&);                               \
  template Var<T> edff_forward(const Var<T>&, const Var<T>&, const EDFFParams<T>&);                \
  template Var<T> downsample(const Var<T>&, const ResampleParams<T>&);                             \
  template Var<T> upsample(const Var<T>&, const ResampleParams<T>&);

AMISR_INSTANTIATE(float)
AMISR_INSTANTIATE(double)

#undef AMISR_INSTANTIATE

}  // namespace amisr::blocks
