#include <gtest/gtest.h>

#include "amisr/blocks.hpp"
#include "amisr/errors.hpp"
#include "amisr/gradcheck.hpp"
#include "amisr/ops.hpp"
#include "test_util.hpp"

using namespace amisr;
using testutil::randn;
using V = Var<double>;

TEST(Backward, SumGivesOnesAndSquareGivesTwoX) {
  Rng rng(1);
  const auto x = randn(Shape(1, 2, 3, 3), rng);
  {
    Tape<double> tape;
    const V vx = tape.leaf(x);
    tape.backward(ops::sum(vx));
    for (double g : tape.grad(vx).data()) EXPECT_EQ(g, 1.0);
  }
  {
    Tape<double> tape;
    const V vx = tape.leaf(x);
    tape.backward(ops::sum(ops::mul(vx, vx)));
    const auto g = tape.grad(vx);
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(g.data()[i], 2.0 * x.data()[i]);
  }
}

TEST(Backward, GradientAccumulatesOverReuse) {
  Tape<double> tape;
  const V x = tape.leaf(Tensor<double>(Shape(1, 1, 1, 1), 3.0));
  // d/dx (x*x + x) = 2x + 1
  tape.backward(ops::sum(ops::add(ops::mul(x, x), x)));
  EXPECT_EQ(tape.grad(x).item(), 7.0);
}

TEST(Backward, SecondCallAndNonScalarAreErrors) {
  Tape<double> tape;
  const V x = tape.leaf(Tensor<double>(Shape(1, 1, 2, 2), 1.0));
  EXPECT_THROW(tape.backward(ops::scale(x, 2.0)), TapeError);
  tape.backward(ops::sum(x));
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(ops::sum(x)), TapeError);
}

TEST(Backward, ConstantsReceiveNothingAndAreNotRecorded) {
  Tape<double> tape;
  const V x = tape.leaf(Tensor<double>(Shape(1, 1, 2, 2), 1.0));
  const V c(Tensor<double>(Shape(1, 1, 2, 2), 2.0));
  const size_t before = tape.size();
  const V cc = ops::mul(c, c);  // constant-only: evaluated eagerly, off the tape
  EXPECT_EQ(tape.size(), before);
  EXPECT_EQ(cc.tape(), nullptr);
  tape.backward(ops::sum(ops::mul(x, cc)));
  for (double g : tape.grad(x).data()) EXPECT_EQ(g, 4.0);
}

TEST(Backward, TopologicalOrderOfRecords) {
  Tape<double> tape;
  const V x = tape.leaf(Tensor<double>(Shape(1, 1, 1, 1), 2.0));
  const V y = ops::gelu(x);
  const V z = ops::mul(y, x);
  EXPECT_LT(x.id(), y.id());
  EXPECT_LT(y.id(), z.id());
  EXPECT_EQ(tape.kind(z.id()), OpKind::mul);
  EXPECT_TRUE(tape.contains(OpKind::gelu));
  EXPECT_EQ(tape.count(OpKind::mul), 1u);
}

TEST(Binder, ParameterGradientsLandInStoreSlots) {
  ParamStore<double> store;
  store.add("w", Tensor<double>(Shape(1, 1, 1, 3), {1.0, 2.0, 3.0}));
  Tape<double> tape;
  Binder<double> b(store, &tape, true);
  const V w = b("w");
  EXPECT_EQ(b("w").id(), w.id());  // bound once
  tape.backward(ops::sum(ops::mul(w, w)));
  EXPECT_EQ(store.grad("w").data()[2], 6.0);
  EXPECT_NEAR(store.grad_norm(), std::sqrt(4.0 + 16.0 + 36.0), 1e-12);
  EXPECT_THROW(b("missing"), ConfigError);
}

TEST(GradCheck, QuadraticIsExactUpToRoundoff) {
  ParamStore<double> store;
  Rng rng(2);
  store.add("x", randn(Shape(1, 1, 4, 4), rng));
  const Objective f = [](Binder<double>& b) {
    const V x = b("x");
    return ops::sum(ops::mul(ops::scale(x, 3.0), x));
  };
  const auto r = grad_check(store, f, {1e-4, 16, 1e-6, 1e-4, 1});
  EXPECT_EQ(r.coordinates, 16);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradCheck, ConvLayer) {
  ParamStore<double> store;
  Rng rng(3);
  store.add("x", randn(Shape(2, 3, 5, 5), rng));
  store.add("w", randn(Shape(4, 3, 3, 3), rng));
  store.add("b", randn(Shape(1, 4, 1, 1), rng));
  const auto r_proj = randn(Shape(2, 4, 3, 3), rng);
  const Objective f = [&](Binder<double>& b) {
    return ops::sum(ops::mul(ops::conv2d(b("x"), b("w"), b("b"), {2, 1, 1}), V(r_proj)));
  };
  const auto r = grad_check(store, f, {1e-4, 120, 1e-6, 1e-4, 2});
  EXPECT_GE(r.coordinates, 100);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, EveryPrimitiveOp) {
  const auto checks = check_ops(5);
  EXPECT_GE(checks.size(), 20u);
  for (const auto& c : checks) EXPECT_LT(c.max_rel_error, 1e-5) << c.op;
}

TEST(GradCheck, LgfiBlock) {
  GradCheckTargetConfig cfg;
  cfg.seed = 4;
  const auto r = run_gradcheck_target("lgfi", cfg);
  EXPECT_GE(r.coordinates, 100);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.param << "[" << r.index << "]";
}

TEST(GradCheck, UnknownTargetIsConfigError) {
  EXPECT_THROW(run_gradcheck_target("nope", {}), ConfigError);
}

class FaultInjection : public ::testing::TestWithParam<const char*> {
 protected:
  void TearDown() override { set_adjoint_fault(std::nullopt); }
};

// A 0.1% error in any single adjoint must be visible to the block check.
TEST_P(FaultInjection, CorruptedAdjointIsCaughtAndLocalized) {
  const auto kind = op_from_name(GetParam());
  ASSERT_TRUE(kind.has_value());
  set_adjoint_fault(*kind, 1.001);
  GradCheckTargetConfig cfg;
  cfg.seed = 2;
  const auto r = run_gradcheck_target("full", cfg);
  EXPECT_GT(r.max_rel_error, 1e-5);
  const auto checks = check_ops(1);
  std::string first;
  for (const auto& c : checks) {
    if (c.max_rel_error >= 1e-5) {
      first = c.op;
      break;
    }
  }
  EXPECT_EQ(first, GetParam());
}

INSTANTIATE_TEST_SUITE_P(Ops, FaultInjection,
                         ::testing::Values("conv2d", "transposed_conv2d", "matmul", "softmax", "layer_norm", "gelu",
                                           "sigmoid", "channel_pool_avg", "concat", "mean_abs"));
