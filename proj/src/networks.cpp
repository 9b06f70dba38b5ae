#include "mhmarl/networks.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mhmarl {

AgentSpec AgentSpec::box(std::size_t obs_dim, std::size_t act_dim, double low, double high) {
  AgentSpec spec{obs_dim, act_dim, std::vector<double>(act_dim, low), std::vector<double>(act_dim, high)};
  spec.validate();
  return spec;
}

void AgentSpec::validate() const {
  if (obs_dim == 0 || act_dim == 0) throw std::invalid_argument("agent spec dimensions must be positive");
  if (act_low.size() != act_dim || act_high.size() != act_dim) {
    throw std::invalid_argument("agent spec bounds must have act_dim entries");
  }
  for (std::size_t k = 0; k < act_dim; ++k) {
    if (!(act_low[k] < act_high[k])) {
      throw std::invalid_argument("agent spec requires act_low < act_high in dimension " + std::to_string(k));
    }
  }
}

std::size_t joint_obs_dim(std::span<const AgentSpec> specs) {
  return std::accumulate(specs.begin(), specs.end(), std::size_t{0},
                         [](std::size_t acc, const AgentSpec& s) { return acc + s.obs_dim; });
}

std::size_t joint_act_dim(std::span<const AgentSpec> specs) {
  return std::accumulate(specs.begin(), specs.end(), std::size_t{0},
                         [](std::size_t acc, const AgentSpec& s) { return acc + s.act_dim; });
}

std::size_t obs_offset(std::span<const AgentSpec> specs, std::size_t i) {
  return joint_obs_dim(specs.first(i));
}

std::size_t act_offset(std::span<const AgentSpec> specs, std::size_t i) {
  return joint_act_dim(specs.first(i));
}

Mlp::Mlp(const std::string& name, std::vector<std::size_t> widths, Rng& rng, double head_scale)
    : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = widths_[l];
    const std::size_t fan_out = widths_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const double scale = l + 1 == layers ? head_scale : 1.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (double& x : w.data()) x = dist(rng) * scale;
    Tensor b({fan_out});
    for (double& x : b.data()) x = dist(rng) * scale;
    weights_.push_back(Parameter{name + ".l" + std::to_string(l) + ".weight", std::move(w)});
    biases_.push_back(Parameter{name + ".l" + std::to_string(l) + ".bias", std::move(b)});
  }
}

Var Mlp::forward(Graph& g, Var input, bool trainable) const {
  if (g.value(input).cols() != in_dim()) {
    throw std::invalid_argument("mlp expects input width " + std::to_string(in_dim()) + ", got shape " +
                                shape_string(g.shape(input)));
  }
  Var h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = g.affine(h, g.parameter(weights_[l], trainable), g.parameter(biases_[l], trainable));
    if (l + 1 < weights_.size()) h = g.relu(h);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

void Mlp::zero_head() {
  weights_.back().value.fill(0.0);
  biases_.back().value.fill(0.0);
}

Var rescale_to_bounds(Graph& g, Var squashed, std::span<const double> low, std::span<const double> high) {
  std::vector<double> half(low.size());
  std::vector<double> mid(low.size());
  for (std::size_t k = 0; k < low.size(); ++k) {
    half[k] = 0.5 * (high[k] - low[k]);
    mid[k] = 0.5 * (high[k] + low[k]);
  }
  Var scaled = g.mul(squashed, g.constant(Tensor::vector(std::move(half))));
  return g.add(scaled, g.constant(Tensor::vector(std::move(mid))));
}

ActorNet::ActorNet(const std::string& name, AgentSpec spec, Rng& rng, std::size_t hidden)
    : spec_(std::move(spec)) {
  spec_.validate();
  mlp_ = Mlp(name, {spec_.obs_dim, hidden, hidden, spec_.act_dim}, rng, kPolicyHeadScale);
}

Var ActorNet::forward(Graph& g, Var obs, bool trainable) const {
  if (g.value(obs).cols() != spec_.obs_dim) {
    throw std::invalid_argument("actor expects observation length " + std::to_string(spec_.obs_dim) +
                                ", got shape " + shape_string(g.shape(obs)));
  }
  return rescale_to_bounds(g, g.tanh(mlp_.forward(g, obs, trainable)), spec_.act_low, spec_.act_high);
}

std::vector<double> ActorNet::act(std::span<const double> obs) const {
  Graph g;
  Var out = forward(g, g.constant(Tensor({1, obs.size()}, std::vector<double>(obs.begin(), obs.end()))), false);
  return g.value(out).values();
}

CriticNet::CriticNet(const std::string& name, std::vector<AgentSpec> specs, Rng& rng, std::size_t hidden)
    : specs_(std::move(specs)) {
  for (const auto& s : specs_) s.validate();
  const std::size_t in = joint_obs_dim(specs_) + joint_act_dim(specs_);
  mlp_ = Mlp(name, {in, hidden, hidden, 1}, rng, 1.0);
}

Var CriticNet::forward(Graph& g, Var joint_input, bool trainable) const {
  if (g.value(joint_input).cols() != input_dim()) {
    throw std::invalid_argument("critic expects input length " + std::to_string(input_dim()) + ", got shape " +
                                shape_string(g.shape(joint_input)));
  }
  return mlp_.forward(g, joint_input, trainable);
}

Var CriticNet::forward(Graph& g, Var obs, Var actions, bool trainable) const {
  return forward(g, g.concat({obs, actions}), trainable);
}

ExpectedNet::ExpectedNet(const std::string& name, std::vector<AgentSpec> specs, std::size_t owner, Rng& rng,
                         std::size_t hidden)
    : specs_(std::move(specs)), owner_(owner) {
  if (specs_.size() < 2) throw std::invalid_argument("expected policy needs at least two agents");
  if (owner_ >= specs_.size()) throw std::invalid_argument("expected policy owner out of range");
  for (std::size_t j = 0; j < specs_.size(); ++j) {
    specs_[j].validate();
    if (j == owner_) continue;
    low_.insert(low_.end(), specs_[j].act_low.begin(), specs_[j].act_low.end());
    high_.insert(high_.end(), specs_[j].act_high.begin(), specs_[j].act_high.end());
  }
  mlp_ = Mlp(name, {joint_obs_dim(specs_), hidden, hidden, low_.size()}, rng, kPolicyHeadScale);
}

Var ExpectedNet::forward(Graph& g, Var joint_obs, bool trainable) const {
  return rescale_to_bounds(g, g.tanh(mlp_.forward(g, joint_obs, trainable)), low_, high_);
}

std::pair<std::size_t, std::size_t> ExpectedNet::block(std::size_t j) const {
  if (j >= specs_.size()) throw std::invalid_argument("mu_slice: agent index out of range");
  if (j == owner_) {
    throw std::invalid_argument("mu_slice: agent " + std::to_string(j) + " owns this expected policy");
  }
  std::size_t begin = 0;
  for (std::size_t k = 0; k < j; ++k) {
    if (k != owner_) begin += specs_[k].act_dim;
  }
  return {begin, begin + specs_[j].act_dim};
}

Var ExpectedNet::mu_slice(Graph& g, Var output, std::size_t j) const {
  auto [begin, end] = block(j);
  return g.slice(output, begin, end);
}

void soft_update_parameters(std::span<Parameter* const> target, std::span<const Parameter* const> online,
                            double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft update rate must lie in [0, 1]");
  if (target.size() != online.size()) throw std::invalid_argument("soft update between different architectures");
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k]->value.shape() != online[k]->value.shape()) {
      throw std::invalid_argument("soft update shape mismatch on '" + target[k]->name + "'");
    }
    auto t = target[k]->value.data();
    auto o = online[k]->value.data();
    for (std::size_t e = 0; e < t.size(); ++e) t[e] = tau * o[e] + (1.0 - tau) * t[e];
  }
}

}  // namespace mhmarl
