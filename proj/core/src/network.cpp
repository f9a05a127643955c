#include "amisr/network.hpp"

#include "amisr/errors.hpp"

namespace amisr {

namespace {

std::string enc(int k) { return "enc" + std::to_string(k); }
std::string dec(int k) { return "dec" + std::to_string(k); }

}  // namespace

ParamSpecs declare_network(const ArchConfig& cfg) {
  cfg.validate();
  const int64_t C = cfg.base_channels;
  const blocks::LgfiOptions lgfi = cfg.lgfi_options();
  ParamSpecs specs;
  blocks::declare_conv(specs, "stem", C, 3, 3);
  for (int k = 1; k <= 3; ++k) {
    const int64_t ck = C << (k - 1);
    blocks::declare_lgfi(specs, enc(k) + ".lgfi", ck, lgfi);
    blocks::declare_downsample(specs, enc(k) + ".down", ck);
  }
  blocks::declare_lgfi(specs, "bottleneck.lgfi1", 8 * C, lgfi);
  blocks::declare_lgfi(specs, "bottleneck.lgfi2", 8 * C, lgfi);
  for (int k = 1; k <= 3; ++k) {
    const int64_t cin = C << (4 - k);
    blocks::declare_upsample(specs, dec(k) + ".up", cin);
    if (!cfg.no_edff) blocks::declare_edff(specs, dec(k) + ".edff", cin / 2);
    blocks::declare_lgfi(specs, dec(k) + ".lgfi", cin / 2, lgfi);
  }
  blocks::declare_conv(specs, "out", 3, C, 3, InitScheme::zeros);
  return specs;
}

template <typename T>
ParamStore<T> build(const ArchConfig& cfg, Rng& rng) {
  return allocate<T>(declare_network(cfg), rng);
}

template <typename T>
Var<T> forward(const ArchConfig& cfg, Binder<T>& params, const Var<T>& x, FeatureTrace* trace) {
  const Shape& s = x.shape();
  if (s.c() != 3 || s.h() != cfg.input_size || s.w() != cfg.input_size) {
    throw ShapeError("network expects (N,3," + std::to_string(cfg.input_size) + "," +
                     std::to_string(cfg.input_size) + ") input, got " + s.str());
  }
  const blocks::LgfiOptions opts = cfg.lgfi_options();
  auto lgfi = [&](const Var<T>& v, const std::string& name) {
    return blocks::lgfi_forward(v, blocks::LGFIParams<T>::bind(params, name, opts));
  };

  Var<T> h = ops::conv2d(x, params("stem.w"), params("stem.b"), ops::same(3));
  std::array<Var<T>, 3> skips;
  for (int k = 1; k <= 3; ++k) {
    skips[k - 1] = lgfi(h, enc(k) + ".lgfi");
    h = blocks::downsample(skips[k - 1], blocks::ResampleParams<T>::bind(params, enc(k) + ".down"));
    if (trace) trace->f[k - 1] = h.shape();
  }
  h = lgfi(lgfi(h, "bottleneck.lgfi1"), "bottleneck.lgfi2");
  if (trace) trace->f[3] = h.shape();
  for (int k = 1; k <= 3; ++k) {
    const Var<T> up = blocks::upsample(h, blocks::ResampleParams<T>::bind(params, dec(k) + ".up"));
    const Var<T>& skip = skips[3 - k];
    const Var<T> fused =
        cfg.no_edff ? ops::add(skip, up)
                    : blocks::edff_forward(skip, up, blocks::EDFFParams<T>::bind(params, dec(k) + ".edff", cfg.skaf_pool));
    h = lgfi(fused, dec(k) + ".lgfi");
    if (trace) trace->f[3 + k] = h.shape();
  }
  return ops::add(ops::conv2d(h, params("out.w"), params("out.b"), ops::same(3)), x);
}

template <typename T>
Tensor<T> infer(const ArchConfig& cfg, ParamStore<T>& params, const Tensor<T>& x) {
  Binder<T> binder(params, nullptr, false);
  return forward(cfg, binder, Var<T>(x)).value();
}

int64_t param_count(const ArchConfig& cfg) { return spec_scalar_count(declare_network(cfg)); }

namespace {

// Per-image MAC arithmetic mirroring the forward graph.
struct MacCounter {
  int64_t total = 0;
  void conv(int64_t cout, int64_t cin_g, int64_t k, int64_t h, int64_t w) { total += cout * h * w * cin_g * k * k; }

  void sa(int64_t c, int64_t h, int64_t w, int heads) {
    for (int i = 0; i < 3; ++i) conv(c, c, 1, h, w);
    for (int i = 0; i < 3; ++i) conv(c, 1, 3, h, w);
    const int64_t ch = c / heads;
    total += 2 * heads * ch * ch * h * w;  // Q K^T and attn V
    conv(c, c, 1, h, w);
  }
  void rdfe(int64_t c, int64_t h, int64_t w, const blocks::RdfeOptions& o) {
    const int64_t b = static_cast<int64_t>(o.kernels.size());
    for (int k : o.kernels) conv(c, 1, k, h, w);
    conv(c / o.au_reduction, b * c, 1, h, w);
    conv(c, c / o.au_reduction, 1, h, w);
    conv(c, b * c, 1, h, w);
    conv(c, c, 3, h, w);
    conv(c, c, 3, h, w);
    const int64_t hd = (h - 1) / 2 + 1, wd = (w - 1) / 2 + 1;
    conv(c, c, 3, hd, wd);
    total += c * h * w * c;  // transposed conv: C_in taps per output element
  }
  void skaf(int64_t c, int64_t h, int64_t w) {
    conv(c, c, 5, h, w);
    conv(c, c, 7, h, w);
  }
  void lgfi(int64_t c, int64_t h, int64_t w, const blocks::LgfiOptions& o) {
    if (o.use_sa) sa(c, h, w, o.heads);
    if (o.ffn_instead_of_rdfe) {
      conv(c, c, 1, h, w);
      conv(c, c, 1, h, w);
    } else if (o.use_rdfe) {
      rdfe(c, h, w, o.rdfe);
    }
    if (o.use_skaf) skaf(c, h, w);
  }
};

}  // namespace

int64_t mac_estimate(const ArchConfig& cfg) {
  cfg.validate();
  const blocks::LgfiOptions o = cfg.lgfi_options();
  const int64_t C = cfg.base_channels;
  int64_t h = cfg.input_size;
  MacCounter m;
  m.conv(C, 3, 3, h, h);
  for (int k = 1; k <= 3; ++k) {
    const int64_t ck = C << (k - 1);
    m.lgfi(ck, h, h, o);
    h /= 2;
    m.conv(2 * ck, ck, 3, h, h);
  }
  m.lgfi(8 * C, h, h, o);
  m.lgfi(8 * C, h, h, o);
  for (int k = 1; k <= 3; ++k) {
    const int64_t cin = C << (4 - k);
    h *= 2;
    m.total += (cin / 2) * h * h * cin;
    if (!cfg.no_edff) {
      m.conv(cin / 2, cin, 1, h, h);
      m.skaf(cin / 2, h, h);
    }
    m.lgfi(cin / 2, h, h, o);
  }
  m.conv(3, C, 3, h, h);
  return m.total;
}

template ParamStore<float> build(const ArchConfig&, Rng&);
template ParamStore<double> build(const ArchConfig&, Rng&);
template Var<float> forward(const ArchConfig&, Binder<float>&, const Var<float>&, FeatureTrace*);
template Var<double> forward(const ArchConfig&, Binder<double>&, const Var<double>&, FeatureTrace*);
template Tensor<float> infer(const ArchConfig&, ParamStore<float>&, const Tensor<float>&);
template Tensor<double> infer(const ArchConfig&, ParamStore<double>&, const Tensor<double>&);

}  // namespace amisr
