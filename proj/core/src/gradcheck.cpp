#include "amisr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amisr/blocks.hpp"
#include "amisr/errors.hpp"
#include "amisr/network.hpp"
#include "amisr/ops.hpp"

namespace amisr {

namespace {

double evaluate(ParamStore<double>& params, const Objective& f) {
  Binder<double> binder(params, nullptr, false);
  const Var<double> loss = f(binder);
  if (loss.shape().numel() != 1) throw ShapeError("grad_check: objective is not scalar");
  const double v = loss.value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

struct Coordinate {
  size_t entry;
  int64_t index;
};

std::vector<Coordinate> sample_coordinates(const ParamStore<double>& params, int samples, Rng& rng) {
  std::vector<Coordinate> coords;
  const auto& entries = params.entries();
  int64_t total = 0;
  for (const auto& e : entries) total += e.value.numel();
  if (total <= samples) {
    for (size_t i = 0; i < entries.size(); ++i) {
      for (int64_t j = 0; j < entries[i].value.numel(); ++j) coords.push_back({i, j});
    }
    return coords;
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    const int64_t n = entries[i].value.numel();
    if (n > 0) coords.push_back({i, static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)))});
  }
  while (static_cast<int>(coords.size()) < samples) {
    int64_t flat = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total)));
    size_t i = 0;
    while (flat >= entries[i].value.numel()) flat -= entries[i++].value.numel();
    coords.push_back({i, flat});
  }
  return coords;
}

constexpr int kMaxRedraws = 8;

struct Stencil {
  double numeric = 0.0;
  bool kinked = false;
};

// Central differences at h and h/2, combined by Richardson extrapolation so
// the h^2 truncation term cancels. Second differences scale as h^2 on smooth
// stretches but only as h across a kink; a ratio far from 4 flags one.
Stencil probe(ParamStore<double>& params, const Objective& f, double* slot, double h, double f0, double noise,
              double floor) {
  const double saved = *slot;
  auto at = [&](double delta) {
    *slot = saved + delta;
    const double v = evaluate(params, f);
    *slot = saved;
    return v;
  };
  const double up = at(h), down = at(-h), up2 = at(h / 2), down2 = at(-h / 2);
  const double d1 = (up - down) / (2.0 * h);
  const double d2 = (up2 - down2) / h;
  const double s1 = up - 2.0 * f0 + down;
  const double s2 = up2 - 2.0 * f0 + down2;
  Stencil st;
  st.numeric = (4.0 * d2 - d1) / 3.0;
  // Kinks too small to move the slope by 1e-7 of its scale are ignored; they
  // are indistinguishable from summation roundoff anyway.
  const double slope_scale = std::max(std::abs(d2), floor);
  st.kinked = std::abs(s1 - 4.0 * s2) > 0.5 * std::abs(s1) + std::max(noise, 1e-7 * h * slope_scale);
  return st;
}

}  // namespace

GradCheckResult grad_check(ParamStore<double>& params, const Objective& f, const GradCheckOptions& opts) {
  params.zero_grad();
  {
    Tape<double> tape;
    Binder<double> binder(params, &tape, true);
    const Var<double> loss = f(binder);
    if (!std::isfinite(loss.value().item())) throw NumericError("grad_check: objective is not finite");
    tape.backward(loss);
  }

  double grad_scale = 0.0;
  for (const auto& e : params.entries()) {
    for (double g : e.grad.data()) grad_scale = std::max(grad_scale, std::abs(g));
  }
  Rng rng(opts.seed);
  GradCheckResult result;
  result.floor = std::max(opts.floor_abs, opts.floor_rel * grad_scale);
  const double f0 = evaluate(params, f);
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0));
  for (Coordinate c : sample_coordinates(params, opts.samples, rng)) {
    auto& entry = params.entries()[c.entry];
    Stencil st;
    for (int attempt = 0;; ++attempt) {
      st = probe(params, f, entry.value.mutable_ptr() + c.index, opts.epsilon, f0, noise, result.floor);
      if (!st.kinked || attempt == kMaxRedraws) break;
      // A non-differentiable point (max-pool switch) lies inside the stencil;
      // draw another coordinate of the same tensor instead.
      ++result.skipped;
      c.index = static_cast<int64_t>(rng.below(static_cast<uint64_t>(entry.value.numel())));
    }
    const double analytic = entry.grad.ptr()[c.index];
    const double denom = std::max({std::abs(st.numeric), std::abs(analytic), result.floor});
    const double rel = std::abs(st.numeric - analytic) / denom;
    ++result.coordinates;
    if (result.index < 0 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.param = entry.name;
      result.index = c.index;
      result.analytic = analytic;
      result.numeric = st.numeric;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

using V = Var<double>;
using ops::mul;
using ops::sum;

Tensor<double> random_tensor(const Shape& s, Rng& rng, double stddev = 1.0) {
  Tensor<double> t(s);
  for (double& v : t.mutable_data()) v = stddev * rng.normal();
  return t;
}

// sum(out * R) for a fixed random R: smooth, and every output element matters.
V project(const V& out, Rng& rng) { return sum(mul(out, V(random_tensor(out.shape(), rng)))); }

// Perturbs every parameter so no gradient is structurally zero at init
// (zero biases, unit gains, zero output conv).
void jitter(ParamStore<double>& store, Rng& rng, double stddev) {
  for (auto& e : store.entries()) {
    for (double& v : e.value.mutable_data()) v += stddev * rng.normal();
  }
}

ParamStore<double> allocate_with_inputs(const ParamSpecs& specs, const std::vector<std::pair<std::string, Shape>>& inputs,
                                        Rng& rng) {
  ParamStore<double> store = allocate<double>(specs, rng);
  for (const auto& [name, shape] : inputs) store.add(name, random_tensor(shape, rng));
  jitter(store, rng, 0.1);
  return store;
}

int reduction_for(int channels) { return channels % 2 == 0 ? 2 : 1; }
int heads_for(int channels) { return channels % 2 == 0 ? 2 : 1; }

}  // namespace

const std::vector<std::string>& gradcheck_targets() {
  static const std::vector<std::string> names{"sa", "rdfe", "skaf", "lgfi", "edff", "full"};
  return names;
}

GradCheckResult run_gradcheck_target(const std::string& target, const GradCheckTargetConfig& cfg) {
  if (cfg.channels < 1 || cfg.size < 2) throw ConfigError("gradcheck: channels and size must be positive");
  const int64_t C = cfg.channels;
  const Shape feat(1, C, cfg.size, cfg.size);
  Rng rng(cfg.seed);
  Rng proj_rng = rng.split(0x9e37);
  GradCheckOptions opts;
  opts.epsilon = cfg.epsilon;
  opts.samples = cfg.samples;
  opts.seed = Rng::mix(cfg.seed + 17);

  blocks::LgfiOptions lgfi;
  lgfi.heads = heads_for(cfg.channels);
  lgfi.rdfe.au_reduction = reduction_for(cfg.channels);

  ParamSpecs specs;
  Objective f;
  std::vector<std::pair<std::string, Shape>> inputs{{"input", feat}};
  // Each objective re-seeds its projection stream so every call sees the same R.
  const uint64_t proj_seed = proj_rng.next_u64();

  if (target == "sa") {
    blocks::declare_sa(specs, "sa", C);
    f = [=](Binder<double>& b) {
      Rng r(proj_seed);
      return project(blocks::sa_forward(b("input"), blocks::SAParams<double>::bind(b, "sa", lgfi.heads)), r);
    };
  } else if (target == "rdfe") {
    blocks::declare_rdfe(specs, "rdfe", C, lgfi.rdfe);
    f = [=](Binder<double>& b) {
      Rng r(proj_seed);
      return project(blocks::rdfe_forward(b("input"), blocks::RDFEParams<double>::bind(b, "rdfe", lgfi.rdfe)), r);
    };
  } else if (target == "skaf") {
    blocks::declare_skaf(specs, "skaf", C);
    f = [=](Binder<double>& b) {
      Rng r(proj_seed);
      const auto [a, c] = blocks::skaf_forward(b("input"), blocks::SKAFParams<double>::bind(b, "skaf"));
      return ops::add(project(a, r), project(c, r));
    };
  } else if (target == "lgfi") {
    blocks::declare_lgfi(specs, "lgfi", C, lgfi);
    f = [=](Binder<double>& b) {
      Rng r(proj_seed);
      return project(blocks::lgfi_forward(b("input"), blocks::LGFIParams<double>::bind(b, "lgfi", lgfi)), r);
    };
  } else if (target == "edff") {
    blocks::declare_edff(specs, "edff", C);
    inputs = {{"input_e", feat}, {"input_d", feat}};
    f = [=](Binder<double>& b) {
      Rng r(proj_seed);
      return project(blocks::edff_forward(b("input_e"), b("input_d"), blocks::EDFFParams<double>::bind(b, "edff")), r);
    };
  } else if (target == "full") {
    ArchConfig arch;
    arch.base_channels = cfg.channels;
    arch.heads = heads_for(cfg.channels);
    arch.au_reduction = reduction_for(cfg.channels);
    arch.input_size = cfg.size;
    arch.dtype = DType::f64;
    if (cfg.size % 8 != 0) throw ConfigError("gradcheck: the full target needs size divisible by 8");
    arch.scale = 8;
    specs = declare_network(arch);
    const Shape img(1, 3, cfg.size, cfg.size);
    inputs = {{"input", img}};
    ParamStore<double> store = allocate_with_inputs(specs, inputs, rng);
    // Place the target at least 0.05 away from the initial output so that
    // finite-difference steps never cross the kink of |sr - hr|.
    Tensor<double> sr0;
    {
      Binder<double> b(store, nullptr, false);
      sr0 = forward(arch, b, b("input")).value();
    }
    Tensor<double> hr(img);
    auto hv = hr.mutable_data();
    auto sv = sr0.data();
    for (size_t i = 0; i < hv.size(); ++i) {
      const double offset = 0.05 + 0.1 * rng.uniform();
      hv[i] = sv[i] + (rng.uniform() < 0.5 ? -offset : offset);
    }
    f = [=](Binder<double>& b) { return ops::mean_abs(ops::sub(forward(arch, b, b("input")), V(hr))); };
    return grad_check(store, f, opts);
  } else {
    throw ConfigError("gradcheck: unknown target '" + target + "'");
  }
  ParamStore<double> store = allocate_with_inputs(specs, inputs, rng);
  return grad_check(store, f, opts);
}

// ---------------------------------------------------------------------------

std::vector<OpCheck> check_ops(uint64_t seed, double epsilon) {
  struct Case {
    std::string op;
    std::vector<std::pair<std::string, Shape>> inputs;
    std::function<V(Binder<double>&, Rng&)> body;
    bool away_from_zero = false;
  };
  const Shape s(2, 3, 4, 5);
  std::vector<Case> cases{
      {"sum", {{"x", s}}, [](Binder<double>& b, Rng&) { return sum(b("x")); }},
      {"mul", {{"x", s}}, [](Binder<double>& b, Rng& r) { return project(b("x"), r); }},
      {"conv2d",
       {{"x", s}, {"w", Shape(4, 3, 3, 3)}, {"b", Shape(1, 4, 1, 1)}},
       [](Binder<double>& b, Rng& r) { return project(ops::conv2d(b("x"), b("w"), b("b"), {2, 1, 1}), r); }},
      {"conv2d",
       {{"x", s}, {"w", Shape(3, 1, 3, 3)}, {"b", Shape(1, 3, 1, 1)}},
       [](Binder<double>& b, Rng& r) { return project(ops::conv2d(b("x"), b("w"), b("b"), ops::same(3, 3)), r); }},
      {"transposed_conv2d",
       {{"x", s}, {"w", Shape(3, 2, 2, 2)}, {"b", Shape(1, 2, 1, 1)}},
       [](Binder<double>& b, Rng& r) { return project(ops::transposed_conv2d(b("x"), b("w"), b("b"), 7, 9), r); }},
      {"matmul",
       {{"a", Shape(2, 3, 4, 5)}, {"c", Shape(2, 3, 5, 2)}},
       [](Binder<double>& b, Rng& r) { return project(ops::matmul(b("a"), b("c")), r); }},
      {"softmax", {{"x", s}}, [](Binder<double>& b, Rng& r) { return project(ops::softmax(b("x"), 3), r); }},
      {"layer_norm",
       {{"x", s}, {"g", Shape(1, 3, 1, 1)}, {"b", Shape(1, 3, 1, 1)}},
       [](Binder<double>& b, Rng& r) { return project(ops::layer_norm(b("x"), b("g"), b("b")), r); }},
      {"channel_pool_avg", {{"x", s}},
       [](Binder<double>& b, Rng& r) { return project(ops::channel_pool(b("x"), ops::PoolKind::avg), r); }},
      {"channel_pool_max", {{"x", s}},
       [](Binder<double>& b, Rng& r) { return project(ops::channel_pool(b("x"), ops::PoolKind::max), r); }},
      {"concat", {{"x", s}, {"y", Shape(2, 2, 4, 5)}},
       [](Binder<double>& b, Rng& r) {
         return project(ops::concat_channels<double>(std::vector<V>{b("x"), b("y")}), r);
       }},
      {"split", {{"x", s}},
       [](Binder<double>& b, Rng& r) {
         const std::vector<int64_t> sizes{1, 2};
         auto parts = ops::split_channels(b("x"), sizes);
         return ops::add(project(parts[0], r), project(parts[1], r));
       }},
      {"reshape", {{"x", s}},
       [](Binder<double>& b, Rng& r) { return project(ops::reshape(b("x"), Shape(1, 6, 20, 1)), r); }},
      {"permute", {{"x", s}},
       [](Binder<double>& b, Rng& r) { return project(ops::permute(b("x"), {0, 2, 3, 1}), r); }},
      {"add", {{"x", s}, {"y", Shape(2, 1, 4, 5)}},
       [](Binder<double>& b, Rng& r) { return project(ops::add(b("x"), b("y")), r); }},
      {"sub", {{"x", s}, {"y", Shape(2, 1, 4, 5)}},
       [](Binder<double>& b, Rng& r) { return project(ops::sub(b("y"), b("x")), r); }},
      {"mul", {{"x", s}, {"y", Shape(2, 1, 4, 5)}},
       [](Binder<double>& b, Rng& r) { return project(ops::mul(b("x"), b("y")), r); }},
      {"sigmoid", {{"x", s}}, [](Binder<double>& b, Rng& r) { return project(ops::sigmoid(b("x")), r); }},
      {"gelu", {{"x", s}}, [](Binder<double>& b, Rng& r) { return project(ops::gelu(b("x")), r); }},
      {"scale", {{"x", s}}, [](Binder<double>& b, Rng& r) { return project(ops::scale(b("x"), -1.7), r); }},
      {"mean", {{"x", s}}, [](Binder<double>& b, Rng&) { return ops::mean(b("x")); }},
      {"mean_abs", {{"x", s}}, [](Binder<double>& b, Rng&) { return ops::mean_abs(b("x")); }, true},
      {"spatial_mean", {{"x", s}},
       [](Binder<double>& b, Rng& r) { return project(ops::spatial_mean(b("x")), r); }},
      {"bce_logits", {{"x", Shape(3, 1, 1, 1)}},
       [](Binder<double>& b, Rng&) {
         return ops::add(ops::bce_with_logits(b("x"), 1), ops::bce_with_logits(b("x"), 0));
       }},
  };

  std::vector<OpCheck> out;
  Rng rng(seed);
  for (const Case& c : cases) {
    ParamStore<double> store;
    for (const auto& [name, shape] : c.inputs) {
      Tensor<double> t = random_tensor(shape, rng);
      if (c.away_from_zero) {
        for (double& v : t.mutable_data()) v += v < 0 ? -0.2 : 0.2;
      }
      store.add(name, std::move(t));
    }
    const uint64_t proj_seed = rng.next_u64();
    Objective f = [&c, proj_seed](Binder<double>& b) {
      Rng r(proj_seed);
      return c.body(b, r);
    };
    GradCheckOptions opts;
    opts.epsilon = epsilon;
    opts.samples = 1000;
    const GradCheckResult res = grad_check(store, f, opts);
    auto it = std::find_if(out.begin(), out.end(), [&](const OpCheck& o) { return o.op == c.op; });
    if (it == out.end()) {
      out.push_back({c.op, res.max_rel_error});
    } else {
      it->max_rel_error = std::max(it->max_rel_error, res.max_rel_error);
    }
  }
  return out;
}

}  // namespace amisr
