#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mhmarl/autodiff.hpp"

namespace mhmarl {
namespace {

TEST(Autodiff, L2NormOfThreeFour) {
  Graph g;
  Var x = g.constant(Tensor::vector({3.0, 4.0}));
  EXPECT_EQ(g.value(g.l2_norm(x)).item(), 5.0);
  EXPECT_EQ(g.shape(g.l2_norm(x)), Shape{1});
}

TEST(Autodiff, L2NormIsPerRow) {
  Graph g;
  Var x = g.constant(Tensor::matrix(2, 2, {3, 4, 6, 8}));
  const Tensor& n = g.value(g.l2_norm(x));
  EXPECT_EQ(n.shape(), (Shape{2, 1}));
  EXPECT_EQ(n[0], 5.0);
  EXPECT_EQ(n[1], 10.0);
}

TEST(Autodiff, Relu) {
  Graph g;
  Var y = g.relu(g.constant(Tensor::vector({-1.0, 0.0, 2.0})));
  EXPECT_EQ(g.value(y).values(), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Autodiff, StopGradientPassesValueBlocksGradient) {
  Parameter x{"x", Tensor::vector({1.5, -2.0})};
  Graph g;
  Var px = g.parameter(x);
  Var s = g.stop_gradient(px);
  EXPECT_EQ(g.value(s), x.value);
  auto grads = g.backward(g.sum(g.square(s))).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{0.0, 0.0}));
}

TEST(Autodiff, SumOfSquares) {
  Parameter x{"x", Tensor::vector({1.0, 2.0})};
  Graph g;
  auto grads = g.backward(g.sum(g.square(g.parameter(x)))).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{2.0, 4.0}));
}

TEST(Autodiff, MeanGradient) {
  Parameter x{"x", Tensor::vector({1.0, 5.0, -2.0, 0.5})};
  Graph g;
  auto grads = g.backward(g.mean(g.parameter(x))).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0].values(), (std::vector<double>(4, 0.25)));
}

TEST(Autodiff, NonScalarRootRejected) {
  Graph g;
  Var x = g.constant(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(g.backward(x), std::invalid_argument);
}

TEST(Autodiff, ShapeMismatchNamesBothShapes) {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({4, 5}));
  try {
    g.matmul(a, b);
    FAIL() << "expected a shape error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 5]"), std::string::npos) << msg;
  }
  EXPECT_THROW(g.add(a, b), std::invalid_argument);
  EXPECT_THROW(g.concat({a, g.constant(Tensor({3, 1}))}), std::invalid_argument);
  EXPECT_THROW(g.slice(a, 2, 2), std::invalid_argument);
  EXPECT_THROW(g.slice(a, 0, 4), std::invalid_argument);
}

TEST(Autodiff, NonFiniteInputRejected) {
  Graph g;
  EXPECT_THROW(g.constant(Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()})), std::domain_error);
  Parameter p{"p", Tensor::vector({std::numeric_limits<double>::infinity()})};
  EXPECT_THROW(g.parameter(p), std::domain_error);
  Var big = g.constant(Tensor::vector({1e200}));
  EXPECT_THROW(g.square(big), std::domain_error);
}

TEST(Autodiff, AbsSubgradientIsZeroAtZero) {
  Parameter x{"x", Tensor::vector({-2.0, 0.0, 3.0})};
  Graph g;
  auto grads = g.backward(g.sum(g.abs(g.parameter(x)))).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{-1.0, 0.0, 1.0}));
}

TEST(Autodiff, L2NormGradientAtZeroVectorIsZero) {
  Parameter x{"x", Tensor::matrix(2, 2, {0.0, 0.0, 3.0, 4.0})};
  Graph g;
  Var n = g.l2_norm(g.parameter(x));
  EXPECT_EQ(g.value(n)[0], 0.0);
  auto grads = g.backward(g.sum(n)).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{0.0, 0.0, 0.6, 0.8}));
  EXPECT_TRUE(grads[0].all_finite());
}

TEST(Autodiff, RowBroadcastAddAndGradient) {
  Parameter x{"x", Tensor::matrix(2, 2, {1, 2, 3, 4})};
  Parameter b{"b", Tensor::vector({10, 20})};
  Graph g;
  Var y = g.add(g.parameter(x), g.parameter(b));
  EXPECT_EQ(g.value(y).values(), (std::vector<double>{11, 22, 13, 24}));
  auto grads = g.backward(g.sum(y)).for_parameters(std::vector<Parameter*>{&x, &b});
  EXPECT_EQ(grads[0].values(), (std::vector<double>(4, 1.0)));
  EXPECT_EQ(grads[1].values(), (std::vector<double>{2.0, 2.0}));
}

TEST(Autodiff, MatmulGradient) {
  Parameter a{"a", Tensor::matrix(1, 2, {1, 2})};
  Parameter w{"w", Tensor::matrix(2, 1, {3, 4})};
  Graph g;
  auto grads = g.backward(g.sum(g.matmul(g.parameter(a), g.parameter(w)))).for_parameters(std::vector<Parameter*>{&a, &w});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{3, 4}));
  EXPECT_EQ(grads[1].values(), (std::vector<double>{1, 2}));
}

TEST(Autodiff, AffineMatchesMatmulPlusBias) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d;
  auto draw = [&](Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
    return t;
  };
  Parameter x{"x", draw(Tensor({5, 4}))};
  Parameter w{"w", draw(Tensor({4, 3}))};
  Parameter b{"b", draw(Tensor({3}))};
  std::vector<Parameter*> params{&x, &w, &b};

  Graph fused;
  Var yf = fused.tanh(fused.affine(fused.parameter(x), fused.parameter(w), fused.parameter(b)));
  auto gf = fused.backward(fused.sum(fused.square(yf))).for_parameters(params);

  Graph split;
  Var ys = split.tanh(split.add(split.matmul(split.parameter(x), split.parameter(w)), split.parameter(b)));
  auto gs = split.backward(split.sum(split.square(ys))).for_parameters(params);

  ASSERT_EQ(fused.value(yf).shape(), (Shape{5, 3}));
  for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(fused.value(yf)[i], split.value(ys)[i], 1e-14);
  for (std::size_t p = 0; p < params.size(); ++p) {
    ASSERT_EQ(gf[p].shape(), gs[p].shape());
    for (std::size_t i = 0; i < gf[p].size(); ++i) EXPECT_NEAR(gf[p][i], gs[p][i], 1e-13) << params[p]->name;
  }

  Graph bad;
  EXPECT_THROW(bad.affine(bad.constant(Tensor({2, 3})), bad.constant(Tensor({4, 2})), bad.constant(Tensor({2}))),
               std::invalid_argument);
  EXPECT_THROW(bad.affine(bad.constant(Tensor({2, 4})), bad.constant(Tensor({4, 2})), bad.constant(Tensor({3}))),
               std::invalid_argument);
}

TEST(Autodiff, ConcatAndSliceRouteGradients) {
  Parameter a{"a", Tensor::matrix(1, 2, {1, 2})};
  Parameter b{"b", Tensor::matrix(1, 1, {3})};
  Graph g;
  Var c = g.concat({g.parameter(a), g.parameter(b)});
  EXPECT_EQ(g.value(c).values(), (std::vector<double>{1, 2, 3}));
  Var tail = g.slice(c, 1, 3);
  auto grads = g.backward(g.sum(g.square(tail))).for_parameters(std::vector<Parameter*>{&a, &b});
  EXPECT_EQ(grads[0].values(), (std::vector<double>{0, 4}));
  EXPECT_EQ(grads[1].values(), (std::vector<double>{6}));
}

TEST(Autodiff, TanhGradient) {
  Parameter x{"x", Tensor::vector({0.3})};
  Graph g;
  auto grads = g.backward(g.sum(g.tanh(g.parameter(x)))).for_parameters(std::vector<Parameter*>{&x});
  const double t = std::tanh(0.3);
  EXPECT_DOUBLE_EQ(grads[0][0], 1.0 - t * t);
}

TEST(Autodiff, PlantedFaultChangesTanhGradient) {
  Parameter x{"x", Tensor::vector({0.3})};
  Graph g(PlantedFault::tanh_derivative);
  auto grads = g.backward(g.sum(g.tanh(g.parameter(x)))).for_parameters(std::vector<Parameter*>{&x});
  const double t = std::tanh(0.3);
  EXPECT_GT(std::fabs(grads[0][0] - (1.0 - t * t)), 1e-3);
}

TEST(Autodiff, UnreachedParameterGetsZeros) {
  Parameter used{"u", Tensor::vector({1.0})};
  Parameter unused{"v", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6})};
  Graph g;
  g.parameter(unused);
  auto gm = g.backward(g.sum(g.parameter(used)));
  auto grads = gm.for_parameters(std::vector<Parameter*>{&used, &unused});
  EXPECT_EQ(grads[1].shape(), (Shape{2, 3}));
  EXPECT_EQ(grads[1].values(), std::vector<double>(6, 0.0));
}

TEST(Autodiff, FrozenParameterGetsNoGradient) {
  Parameter w{"w", Tensor::vector({2.0})};
  Parameter x{"x", Tensor::vector({3.0})};
  Graph g;
  Var y = g.mul(g.parameter(x), g.parameter(w, false));
  auto grads = g.backward(g.sum(y)).for_parameters(std::vector<Parameter*>{&x, &w});
  EXPECT_EQ(grads[0][0], 2.0);
  EXPECT_EQ(grads[1][0], 0.0);
}

TEST(Autodiff, RepeatedParameterAccumulates) {
  Parameter x{"x", Tensor::vector({3.0})};
  Graph g;
  Var a = g.parameter(x);
  Var b = g.parameter(x);
  EXPECT_EQ(a.id, b.id);
  auto grads = g.backward(g.sum(g.mul(a, b))).for_parameters(std::vector<Parameter*>{&x});
  EXPECT_EQ(grads[0][0], 6.0);
}

// A random expression with and without a stop_gradient on one branch: the
// blocked branch contributes nothing, the other branch is unaffected.
TEST(Autodiff, StopGradientBlocksOnlyItsBranch) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Parameter x{"x", Tensor::matrix(3, 4, std::vector<double>(12))};
    Parameter w{"w", Tensor::matrix(4, 2, std::vector<double>(8))};
    for (double& v : x.value.data()) v = u(rng);
    for (double& v : w.value.data()) v = u(rng);
    std::vector<Parameter*> params{&x, &w};

    Graph full;
    Var h = full.tanh(full.matmul(full.parameter(x), full.parameter(w)));
    Var branch = full.square(full.parameter(x));
    auto g_with = full.backward(full.add(full.sum(h), full.sum(full.stop_gradient(branch)))).for_parameters(params);

    Graph only;
    Var h2 = only.tanh(only.matmul(only.parameter(x), only.parameter(w)));
    auto g_only = only.backward(only.sum(h2)).for_parameters(params);
    EXPECT_EQ(g_with[0], g_only[0]);
    EXPECT_EQ(g_with[1], g_only[1]);
  }
}

TEST(Autodiff, DeterministicValuesAndGradients) {
  auto run = [] {
    Parameter x{"x", Tensor::matrix(2, 3, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6})};
    Parameter w{"w", Tensor::matrix(3, 3, {1, 2, 3, -1, 0.5, 2, 0.25, -3, 1})};
    Graph g;
    Var y = g.mean(g.l2_norm(g.relu(g.matmul(g.parameter(x), g.parameter(w)))));
    return std::pair{g.value(y).item(), g.backward(y).for_parameters(std::vector<Parameter*>{&x, &w})};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Autodiff, ValueReferencesSurviveGraphGrowth) {
  Graph g;
  const Tensor& first = g.value(g.constant(Tensor::vector({1.0, 2.0})));
  for (int k = 0; k < 2000; ++k) g.constant(Tensor::vector({static_cast<double>(k)}));
  EXPECT_EQ(first.values(), (std::vector<double>{1.0, 2.0}));
}

TEST(Autodiff, ReluPatternTracksSigns) {
  Graph g;
  g.relu(g.constant(Tensor::vector({-1.0, 2.0, 0.0})));
  EXPECT_EQ(g.relu_pattern(), (std::vector<bool>{false, true, false}));
}

}  // namespace
}  // namespace mhmarl
