#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mhmarl/autodiff.hpp"
#include "mhmarl/networks.hpp"

namespace mhmarl {

// M sampled transitions stored column-wise.
struct Minibatch {
  Tensor obs;       // [M, sum obs_dim]
  Tensor actions;   // [M, sum act_dim]
  Tensor rewards;   // [M, n]
  Tensor next_obs;  // [M, sum obs_dim]
  Tensor done;      // [M, 1]; 1.0 marks a terminal transition

  std::size_t size() const { return obs.rows(); }
  // Throws std::invalid_argument if row counts or widths disagree with specs.
  void validate(std::span<const AgentSpec> specs) const;
};

struct HyperParams {
  double gamma = 0.95;
  double tau = 0.01;
  double eta = 0.05;
  double beta = 2.0;
  std::size_t batch_size = 64;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double lr_expected = 1e-3;

  void validate() const;
};

// Columns of agent i inside a joint observation / action node.
Var agent_obs(Graph& g, std::span<const AgentSpec> specs, Var joint_obs, std::size_t i);
// Joint action with agent i's block replaced by `own`; every other block is
// taken from `joint_actions`.
Var substitute_action(Graph& g, std::span<const AgentSpec> specs, Var joint_actions, std::size_t i, Var own);

// Target-policy smoothing for the twin-critic backend: clipped Gaussian noise
// added to each target action, result clamped to the action bounds.
struct TargetSmoothing {
  double stddev = 0.2;
  double clip = 0.5;
  Rng* rng = nullptr;
};

// y_i = r_i + gamma * (1 - done) * min_k Q'_k(o', pi'_1(o'_1), ..., pi'_n(o'_n)).
// One target critic gives the plain bootstrap; two give the clipped double-Q
// form. Returns a constant [M, 1] tensor.
Tensor td_target(const Minibatch& batch, std::size_t agent, std::span<const QFunction* const> target_critics,
                 std::span<const ActorNet* const> target_actors, double gamma,
                 const TargetSmoothing* smoothing = nullptr);

// mean((Q_i(o, a) - y)^2); gradient reaches the critic only.
Var critic_loss(Graph& g, const QFunction& critic, const Minibatch& batch, const Tensor& y);

// Agent i's current action substituted into its frozen critic. Shared by the
// actor loss, the help loss and the mix ratio.
struct PolicyEval {
  std::size_t agent = 0;
  Var obs;         // joint observation, constant
  Var actions;     // recorded joint actions, constant
  Var own_action;  // pi_i(o_i), [M, act_dim_i]
  Var q;           // Q_i with slot i = pi_i(o_i), [M, 1]
};

PolicyEval evaluate_policy(Graph& g, const Minibatch& batch, std::size_t agent, const ActorNet& actor,
                           const QFunction& critic, bool actor_trainable = true);

// mean(-Q_i(o, a_1, ..., pi_i(o_i), ..., a_n)).
Var actor_loss(Graph& g, const PolicyEval& eval);
Var actor_loss(Graph& g, const ActorNet& actor, const QFunction& critic, const Minibatch& batch, std::size_t agent);

// mean(-Q_i(o, pi_i(o_i), mu_i(o))); pi_i is held fixed, gradient reaches mu_i.
Var expected_loss(Graph& g, const ExpectedNet& expected, const QFunction& critic, const ActorNet& actor,
                  const Minibatch& batch);

// 1 for x > 0, otherwise 0 (including x == 0).
double step_eps(double x);

struct HelpLoss {
  Var loss;
  // Per-teacher gated distances ||pi_i(o_i) - mu_j(o, i)|| * eps(...), [M, 1],
  // ordered like the `teachers` argument.
  std::vector<Var> terms;
  // Gate values, [M, teachers].
  Tensor gates;
  // Fraction of open gates.
  double gate_rate = 0.0;
};

// Selective imitation of the actions other agents expect from agent i:
//   mean_s 1/(n-1) sum_j ||pi_i(o_i) - mu_j(o, i)|| * eps(Q_i|mu_j(o,i) + eta - Q_i|pi_i(o_i))
// Gradient flows only through pi_i inside the norm. With selective = false
// every gate is 1. `teachers` must hold the expected policy of every other
// agent.
HelpLoss help_loss(Graph& g, const PolicyEval& own, const QFunction& critic,
                   std::span<const ExpectedNet* const> teachers, double eta, bool selective = true);
HelpLoss help_loss(Graph& g, const ActorNet& actor, const QFunction& critic,
                   std::span<const ExpectedNet* const> teachers, const Minibatch& batch, std::size_t agent,
                   double eta, bool selective = true);

// alpha_i = beta / M * sum |Q_i(o, ..., pi_i(o_i), ...)|, a constant.
double mix_ratio_alpha(Graph& g, const PolicyEval& own, double beta);
double mix_ratio_alpha(const ActorNet& actor, const QFunction& critic, const Minibatch& batch, std::size_t agent,
                       double beta);

// L_actor + alpha * L_help, or alpha * L_help alone when include_actor_term is
// false.
Var mh_actor_loss(Graph& g, Var actor_term, Var help_term, double alpha, bool include_actor_term = true);
double mh_actor_loss(double actor_term, double help_term, double alpha);

}  // namespace mhmarl
