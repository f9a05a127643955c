#include <map>
#include <memory>
#include <set>

#include <gtest/gtest.h>

#include "amisr/errors.hpp"
#include "amisr/kernels.hpp"
#include "amisr/network.hpp"
#include "amisr/ops.hpp"
#include "test_util.hpp"

using namespace amisr;
using testutil::randn;

namespace {

// Hand enumeration of learnable scalars, written from the block definitions.
int64_t conv_p(int64_t cout, int64_t cin_g, int64_t k) { return cout * cin_g * k * k + cout; }
int64_t norm_p(int64_t c) { return 2 * c; }
int64_t sa_p(int64_t c) { return 3 * conv_p(c, c, 1) + 3 * conv_p(c, 1, 3) + conv_p(c, c, 1); }
int64_t rdfe_p(int64_t c, int r) {
  return conv_p(c, 1, 3) + conv_p(c, 1, 5) + conv_p(c, 1, 7) + conv_p(c / r, 3 * c, 1) + conv_p(c, c / r, 1) +
         conv_p(c, 3 * c, 1) + norm_p(c) + 2 * conv_p(c, c, 3) + conv_p(c, c, 3) + (c * c * 4 + c);
}
int64_t skaf_p(int64_t c) { return conv_p(c, c, 5) + conv_p(c, c, 7); }
int64_t lgfi_p(int64_t c, int r) { return norm_p(c) + sa_p(c) + rdfe_p(c, r) + skaf_p(c); }
int64_t edff_p(int64_t c) { return conv_p(c, 2 * c, 1) + skaf_p(c); }

int64_t expected_params(int64_t C, int r) {
  int64_t n = conv_p(C, 3, 3);
  for (int64_t c : {C, 2 * C, 4 * C}) n += lgfi_p(c, r) + conv_p(2 * c, c, 3);
  n += 2 * lgfi_p(8 * C, r);
  for (int64_t cin : {8 * C, 4 * C, 2 * C}) n += (cin * (cin / 2) * 4 + cin / 2) + edff_p(cin / 2) + lgfi_p(cin / 2, r);
  return n + conv_p(3, C, 3);
}

ArchConfig small(int C = 4, int size = 16) {
  ArchConfig cfg;
  cfg.base_channels = C;
  cfg.input_size = size;
  cfg.heads = 2;
  cfg.au_reduction = 2;
  return cfg;
}

}  // namespace

TEST(Network, ParamCountMatchesHandEnumeration) {
  for (int C : {4, 8, 16, 32}) {
    ArchConfig cfg;
    cfg.base_channels = C;
    EXPECT_EQ(param_count(cfg), expected_params(C, 4)) << "C=" << C;
  }
  EXPECT_EQ(param_count(small()), expected_params(4, 2));
}

TEST(Network, NamesFollowTheStageLayout) {
  ArchConfig cfg;
  cfg.base_channels = 8;
  const ParamSpecs specs = declare_network(cfg);
  std::set<std::string> names;
  for (const auto& s : specs) EXPECT_TRUE(names.insert(s.name).second) << "duplicate " << s.name;
  EXPECT_EQ(specs.front().name, "stem.w");
  EXPECT_EQ(specs.front().shape, Shape(8, 3, 3, 3));
  EXPECT_EQ(conv_p(8, 3, 3), 224);
  EXPECT_EQ(specs.back().name, "out.b");
  for (const char* n : {"enc1.lgfi.sa.q_pw.w", "enc3.down.conv.w", "bottleneck.lgfi2.skaf.k7.w", "dec1.up.conv.w",
                        "dec2.edff.reduce.w", "dec3.lgfi.rdfe.frm.hg_up.w"})
    EXPECT_TRUE(names.count(n)) << n;
  std::map<std::string, Shape> by_name;
  for (const auto& s : specs) by_name[s.name] = s.shape;
  EXPECT_EQ(by_name["enc3.down.conv.w"], Shape(64, 32, 3, 3));
  EXPECT_EQ(by_name["dec1.up.conv.w"], Shape(64, 32, 2, 2));
  EXPECT_EQ(by_name["dec3.lgfi.norm.gamma"], Shape(1, 8, 1, 1));
}

TEST(Network, ShapeScheduleOnSmallSizes) {
  for (int C : {4, 8}) {
    for (int S : {16, 32, 64}) {
      ArchConfig cfg;
      cfg.base_channels = C;
      cfg.input_size = S;
      Rng rng(1);
      auto params = build<float>(cfg, rng);
      Binder<float> b(params, nullptr, false);
      FeatureTrace t;
      const auto y = forward(cfg, b, Var<float>(Tensor<float>(Shape(2, 3, S, S), 0.25f)), &t);
      EXPECT_EQ(t.f[0], Shape(2, 2 * C, S / 2, S / 2));
      EXPECT_EQ(t.f[2], Shape(2, 8 * C, S / 8, S / 8));
      EXPECT_EQ(t.f[3], Shape(2, 8 * C, S / 8, S / 8));
      EXPECT_EQ(t.f[5], Shape(2, 2 * C, S / 2, S / 2));
      EXPECT_EQ(t.f[6], Shape(2, C, S, S));
      EXPECT_EQ(y.shape(), Shape(2, 3, S, S));
    }
  }
}

TEST(Network, UntrainedNetworkIsIdentityAndSameSeedSameStore) {
  const ArchConfig cfg = small();
  Rng a(3), b(3), c(4);
  auto pa = build<float>(cfg, a);
  EXPECT_TRUE(stores_bit_equal(pa, build<float>(cfg, b)));
  EXPECT_FALSE(stores_bit_equal(pa, build<float>(cfg, c)));
  Rng rng(5);
  const auto x = randn<float>(Shape(1, 3, 16, 16), rng);
  EXPECT_TRUE(bit_equal(infer(cfg, pa, x), x));
}

TEST(Network, ZeroOutputConvIsIdentityWithRandomBody) {
  ArchConfig cfg = small();
  cfg.dtype = DType::f64;
  Rng rng(6);
  auto p = build<double>(cfg, rng);
  testutil::randomize(p, rng, 0.3);
  for (const char* n : {"out.w", "out.b"}) std::fill(p.value(n).mutable_data().begin(), p.value(n).mutable_data().end(), 0.0);
  const auto x = randn(Shape(2, 3, 16, 16), rng);
  EXPECT_TRUE(bit_equal(infer(cfg, p, x), x));
}

TEST(Network, MacEstimateMatchesExecutedKernels) {
  for (const ArchConfig cfg : {small(4, 16), small(8, 32)}) {
    Rng rng(7);
    auto p = build<float>(cfg, rng);
    kernels::reset_mac_count();
    infer(cfg, p, Tensor<float>(Shape(1, 3, cfg.input_size, cfg.input_size), 0.5f));
    EXPECT_EQ(static_cast<int64_t>(kernels::mac_count()), mac_estimate(cfg));
  }
}

TEST(Network, RejectsWrongInputShape) {
  const ArchConfig cfg = small();
  Rng rng(8);
  auto p = build<float>(cfg, rng);
  EXPECT_THROW(infer(cfg, p, Tensor<float>(Shape(1, 3, 32, 32))), ShapeError);
  EXPECT_THROW(infer(cfg, p, Tensor<float>(Shape(1, 1, 16, 16))), ShapeError);
}

// Every parameter must influence the loss once the zero output conv is
// randomized; a parameter with an identically zero gradient is dead wiring.
TEST(Network, NoDeadParameters) {
  for (const std::string variant : {"full", "no_skaf", "ffn_instead_of_rdfe", "no_edff", "skaf_pool_avg"}) {
    ArchConfig cfg = make_variant(small(), variant);
    cfg.dtype = DType::f64;
    Rng rng(9);
    auto p = build<double>(cfg, rng);
    testutil::randomize(p, rng, 0.2);
    const auto x = randn(Shape(2, 3, 16, 16), rng);
    const auto target = randn(Shape(2, 3, 16, 16), rng);
    Tape<double> tape;
    Binder<double> b(p, &tape, true);
    tape.backward(ops::mean_abs(ops::sub(forward(cfg, b, Var<double>(x)), Var<double>(target))));
    for (const auto& e : p.entries()) {
      double m = 0.0;
      for (double g : e.grad.data()) m = std::max(m, std::abs(g));
      EXPECT_GT(m, 0.0) << variant << ": " << e.name;
    }
  }
}

TEST(Network, VariantGraphsDropTheirComponents) {
  Rng rng(10);
  auto run = [&](const std::string& variant) {
    const ArchConfig cfg = make_variant(small(), variant);
    auto p = build<float>(cfg, rng);
    auto tape = std::make_unique<Tape<float>>();
    Binder<float> b(p, tape.get(), true);
    forward(cfg, b, Var<float>(Tensor<float>(Shape(1, 3, 16, 16), 0.5f)));
    return tape;
  };
  EXPECT_TRUE(run("full")->contains(OpKind::softmax));
  EXPECT_FALSE(run("no_sa")->contains(OpKind::softmax));
  EXPECT_FALSE(run("skaf_pool_avg")->contains(OpKind::channel_pool_max));
  EXPECT_FALSE(run("skaf_pool_max")->contains(OpKind::channel_pool_avg));
  const auto no_sa_names = declare_network(make_variant(small(), "no_sa"));
  for (const auto& s : no_sa_names) EXPECT_EQ(s.name.find(".sa."), std::string::npos) << s.name;
  for (const auto& s : declare_network(make_variant(small(), "no_edff")))
    EXPECT_EQ(s.name.find(".edff."), std::string::npos) << s.name;
}

TEST(Network, VariantSizesOrderAsExpected) {
  ArchConfig base;
  base.base_channels = 8;
  const int64_t full = param_count(base);
  const int64_t no_sa = param_count(make_variant(base, "no_sa"));
  const int64_t no_rdfe = param_count(make_variant(base, "no_rdfe"));
  EXPECT_LT(no_rdfe, no_sa);
  EXPECT_LT(no_sa, full);
  EXPECT_LT(param_count(make_variant(base, "no_skaf")), full);
  EXPECT_LT(param_count(make_variant(base, "rdfe_single_path_3")), full);
}

TEST(ArchConfig, ValidationRules) {
  auto bad = [](auto mutate) {
    ArchConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](ArchConfig& c) { c.input_size = 100; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.scale = 3; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.heads = 3; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.au_reduction = 5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.no_sa = c.no_rdfe = true; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.no_rdfe = c.ffn_instead_of_rdfe = true; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ArchConfig& c) { c.rdfe_single_path = 4; }).validate(), ConfigError);
  EXPECT_NO_THROW(ArchConfig{}.validate());
}

TEST(ArchConfig, JsonRoundTripAndUnknownKeys) {
  ArchConfig c = make_variant(ArchConfig{}, "skaf_pool_max");
  c.base_channels = 16;
  c.dtype = DType::f64;
  EXPECT_EQ(arch_from_json(to_json(c)), c);
  nlohmann::json j = to_json(c);
  j["widht"] = 3;
  EXPECT_THROW(arch_from_json(j), ConfigError);
  EXPECT_THROW(arch_from_json(nlohmann::json{{"base_channels", "eight"}}), ConfigError);
}

TEST(ArchConfig, VariantsAreKnownAndFullClearsFlags) {
  for (const auto& v : variant_names()) EXPECT_NO_THROW(make_variant(ArchConfig{}, v)) << v;
  EXPECT_THROW(make_variant(ArchConfig{}, "no_everything"), ConfigError);
  ArchConfig c = make_variant(ArchConfig{}, "no_sa");
  EXPECT_TRUE(c.no_sa);
  EXPECT_EQ(make_variant(c, "full"), ArchConfig{});
  EXPECT_EQ(make_variant(ArchConfig{}, "rdfe_single_path_5").rdfe_single_path, 5);
}
