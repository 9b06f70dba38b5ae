#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhmarl/autodiff.hpp"
#include "mhmarl/tensor.hpp"

namespace mhmarl {

using Rng = std::mt19937_64;

struct AgentSpec {
  std::size_t obs_dim = 1;
  std::size_t act_dim = 1;
  std::vector<double> act_low;
  std::vector<double> act_high;

  static AgentSpec box(std::size_t obs_dim, std::size_t act_dim, double low, double high);
  // Throws std::invalid_argument unless dims are positive and low < high
  // componentwise.
  void validate() const;
};

std::size_t joint_obs_dim(std::span<const AgentSpec> specs);
std::size_t joint_act_dim(std::span<const AgentSpec> specs);
// Offset of agent `i`'s block inside the joint observation / action vector.
std::size_t obs_offset(std::span<const AgentSpec> specs, std::size_t i);
std::size_t act_offset(std::span<const AgentSpec> specs, std::size_t i);

inline constexpr std::size_t kHiddenUnits = 64;
inline constexpr double kPolicyHeadScale = 0.1;

// Fully connected stack: ReLU between layers, linear output. Weights are
// stored [in, out] so a batch [B, in] multiplies on the left.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}. Every layer is uniform in +-1/sqrt(fan_in);
  // the output layer is further multiplied by head_scale.
  Mlp(const std::string& name, std::vector<std::size_t> widths, Rng& rng, double head_scale = 1.0);

  Var forward(Graph& g, Var input, bool trainable) const;

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  void zero_head();

 private:
  std::vector<std::size_t> widths_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

// Maps tanh output in (-1, 1) onto [low, high] per dimension.
Var rescale_to_bounds(Graph& g, Var squashed, std::span<const double> low, std::span<const double> high);

// pi_i: local observation -> bounded action.
class ActorNet {
 public:
  ActorNet() = default;
  ActorNet(const std::string& name, AgentSpec spec, Rng& rng, std::size_t hidden = kHiddenUnits);

  // obs: [B, obs_dim] -> [B, act_dim].
  Var forward(Graph& g, Var obs, bool trainable = true) const;
  // Single observation convenience, evaluated in a private graph.
  std::vector<double> act(std::span<const double> obs) const;

  const AgentSpec& spec() const { return spec_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }
  std::vector<const Parameter*> parameters() const { return std::as_const(mlp_).parameters(); }

 private:
  AgentSpec spec_;
  Mlp mlp_;
};

// Anything that scores a joint observation and joint action. The learned
// critic is the usual implementation; tests plug in fixed analytic critics.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual const std::vector<AgentSpec>& specs() const = 0;
  // obs: [B, sum obs], actions: [B, sum act] -> [B, 1].
  virtual Var evaluate(Graph& g, Var obs, Var actions, bool trainable) const = 0;
};

// Q_i: [joint observation, joint action] -> scalar.
class CriticNet final : public QFunction {
 public:
  CriticNet() = default;
  CriticNet(const std::string& name, std::vector<AgentSpec> specs, Rng& rng, std::size_t hidden = kHiddenUnits);

  // input: [B, sum obs + sum act] -> [B, 1].
  Var forward(Graph& g, Var joint_input, bool trainable = true) const;
  // obs: [B, sum obs], actions: [B, sum act].
  Var forward(Graph& g, Var obs, Var actions, bool trainable = true) const;
  Var evaluate(Graph& g, Var obs, Var actions, bool trainable) const override {
    return forward(g, obs, actions, trainable);
  }

  std::size_t input_dim() const { return mlp_.in_dim(); }
  const std::vector<AgentSpec>& specs() const override { return specs_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }
  std::vector<const Parameter*> parameters() const { return std::as_const(mlp_).parameters(); }

 private:
  std::vector<AgentSpec> specs_;
  Mlp mlp_;
};

// mu_i: joint observation -> expected actions of every agent except the owner,
// laid out in agent-index order with the owner's block omitted.
class ExpectedNet {
 public:
  ExpectedNet() = default;
  ExpectedNet(const std::string& name, std::vector<AgentSpec> specs, std::size_t owner, Rng& rng,
              std::size_t hidden = kHiddenUnits);

  // obs: [B, sum obs] -> [B, sum_{j != owner} act_dim_j].
  Var forward(Graph& g, Var joint_obs, bool trainable = true) const;
  // Agent j's block of an output produced by forward(). Throws
  // std::invalid_argument for j == owner or j out of range.
  Var mu_slice(Graph& g, Var output, std::size_t j) const;
  // Column range [first, second) of agent j's block.
  std::pair<std::size_t, std::size_t> block(std::size_t j) const;

  std::size_t owner() const { return owner_; }
  std::size_t output_dim() const { return mlp_.out_dim(); }
  // Concatenated bounds of the output blocks.
  std::span<const double> low() const { return low_; }
  std::span<const double> high() const { return high_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }
  std::vector<const Parameter*> parameters() const { return std::as_const(mlp_).parameters(); }

 private:
  std::vector<AgentSpec> specs_;
  std::size_t owner_ = 0;
  std::vector<double> low_;
  std::vector<double> high_;
  Mlp mlp_;
};

// Online network plus a slowly tracking copy used for bootstrap targets.
template <typename Net>
struct TargetPair {
  Net online;
  Net target;

  explicit TargetPair(Net net) : online(std::move(net)), target(online) {}

  // target <- tau * online + (1 - tau) * target, elementwise.
  void soft_update(double tau);
};

void soft_update_parameters(std::span<Parameter* const> target, std::span<const Parameter* const> online,
                            double tau);

template <typename Net>
void TargetPair<Net>::soft_update(double tau) {
  auto t = target.parameters();
  auto o = std::as_const(online).parameters();
  soft_update_parameters(t, o, tau);
}

}  // namespace mhmarl
