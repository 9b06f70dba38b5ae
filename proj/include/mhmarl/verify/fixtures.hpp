#pragma once

#include <span>
#include <vector>

#include "mhmarl/losses.hpp"
#include "mhmarl/networks.hpp"

namespace mhmarl::verify {

// Q(o, a) = bias + o . w_obs + a . w_act. Exact, so gates and substituted
// values are predictable by hand.
class LinearCritic final : public QFunction {
 public:
  LinearCritic(std::vector<AgentSpec> specs, std::vector<double> w_obs, std::vector<double> w_act, double bias);

  const std::vector<AgentSpec>& specs() const override { return specs_; }
  Var evaluate(Graph& g, Var obs, Var actions, bool trainable) const override;
  double value(std::span<const double> obs, std::span<const double> actions) const;

  const std::vector<double>& w_obs() const { return w_obs_; }
  const std::vector<double>& w_act() const { return w_act_; }
  double bias() const { return bias_; }

 private:
  std::vector<AgentSpec> specs_;
  std::vector<double> w_obs_;
  std::vector<double> w_act_;
  double bias_;
};

// Zero every weight and bias, then set the head bias so the net outputs
// `output` for any input. Values must lie strictly inside the bounds.
void make_constant_actor(ActorNet& actor, std::span<const double> output);
void make_constant_expected(ExpectedNet& expected, std::span<const double> output);

// Observations uniform in [-1, 1], actions uniform inside bounds, rewards
// standard normal, done with probability 1/4.
Minibatch random_minibatch(std::span<const AgentSpec> specs, std::size_t m, Rng& rng);

}  // namespace mhmarl::verify
