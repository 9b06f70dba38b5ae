#include <gtest/gtest.h>

#include <cmath>

#include "mhmarl/adam.hpp"
#include "mhmarl/autodiff.hpp"

namespace mhmarl {
namespace {

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  Parameter w{"w", Tensor::vector({1.0, -2.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  adam_step(params, std::vector<Tensor>{Tensor({2})}, state, 0.01);
  EXPECT_EQ(w.value.values(), (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(state.step, 1u);
}

// Hand evaluation at t = 1: m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2,
// so the step is lr * g / (|g| + eps).
TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  Parameter w{"w", Tensor::vector({1.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  adam_step(params, std::vector<Tensor>{Tensor::vector({1.0})}, state, 0.001);
  EXPECT_NEAR(w.value[0], 1.0 - 0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  Parameter w{"w", Tensor::vector({0.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  for (int t = 0; t < 1000; ++t) {
    Graph g;
    Var d = g.sub(g.parameter(w), g.constant(Tensor::vector({3.0})));
    auto grads = g.backward(g.sum(g.square(d))).for_parameters(params);
    adam_step(params, grads, state, 0.01);
  }
  EXPECT_LT(std::fabs(w.value[0] - 3.0), 0.05);
  EXPECT_EQ(state.step, 1000u);
}

TEST(Adam, RejectsShapeMismatch) {
  Parameter w{"w", Tensor::vector({1.0, 2.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor({3})}, state, 0.01), std::invalid_argument);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{}, state, 0.01), std::invalid_argument);
  Parameter other{"o", Tensor({4})};
  std::vector<Parameter*> wrong{&other};
  EXPECT_THROW(adam_step(wrong, std::vector<Tensor>{Tensor({4})}, state, 0.01), std::invalid_argument);
  EXPECT_EQ(state.step, 0u);
}

TEST(Adam, RejectsNonPositiveLearningRate) {
  Parameter w{"w", Tensor::vector({1.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor({1})}, state, 0.0), std::invalid_argument);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor({1})}, state, -1e-3), std::invalid_argument);
}

TEST(Adam, MovesAgainstGradientSign) {
  Parameter w{"w", Tensor::vector({0.0, 0.0})};
  std::vector<Parameter*> params{&w};
  AdamState state = AdamState::for_parameters(params);
  adam_step(params, std::vector<Tensor>{Tensor::vector({2.0, -0.5})}, state, 0.1);
  EXPECT_LT(w.value[0], 0.0);
  EXPECT_GT(w.value[1], 0.0);
}

}  // namespace
}  // namespace mhmarl
