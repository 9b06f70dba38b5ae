#include "mhmarl/verify/fixtures.hpp"

#include <cmath>
#include <stdexcept>

namespace mhmarl::verify {

LinearCritic::LinearCritic(std::vector<AgentSpec> specs, std::vector<double> w_obs, std::vector<double> w_act,
                           double bias)
    : specs_(std::move(specs)), w_obs_(std::move(w_obs)), w_act_(std::move(w_act)), bias_(bias) {
  if (w_obs_.size() != joint_obs_dim(specs_) || w_act_.size() != joint_act_dim(specs_)) {
    throw std::invalid_argument("linear critic weights do not match the joint dims");
  }
}

Var LinearCritic::evaluate(Graph& g, Var obs, Var actions, bool) const {
  Var from_obs = g.matmul(obs, g.constant(Tensor({w_obs_.size(), 1}, w_obs_)));
  Var from_act = g.matmul(actions, g.constant(Tensor({w_act_.size(), 1}, w_act_)));
  return g.add(g.add(from_obs, from_act), g.constant(Tensor::vector({bias_})));
}

double LinearCritic::value(std::span<const double> obs, std::span<const double> actions) const {
  double o = 0.0, a = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) o += obs[k] * w_obs_[k];
  for (std::size_t k = 0; k < actions.size(); ++k) a += actions[k] * w_act_[k];
  return o + a + bias_;
}

namespace {

void constant_head(Mlp& mlp, std::span<const double> output, std::span<const double> low,
                   std::span<const double> high) {
  if (output.size() != mlp.out_dim()) throw std::invalid_argument("constant head: wrong output length");
  auto params = mlp.parameters();
  for (Parameter* p : params) p->value.fill(0.0);
  Tensor& head_bias = params.back()->value;
  for (std::size_t k = 0; k < output.size(); ++k) {
    const double half = 0.5 * (high[k] - low[k]);
    const double mid = 0.5 * (high[k] + low[k]);
    const double t = (output[k] - mid) / half;
    if (!(std::fabs(t) < 1.0)) throw std::invalid_argument("constant head: output must lie inside the bounds");
    head_bias[k] = std::atanh(t);
  }
}

}  // namespace

void make_constant_actor(ActorNet& actor, std::span<const double> output) {
  constant_head(actor.mlp(), output, actor.spec().act_low, actor.spec().act_high);
}

void make_constant_expected(ExpectedNet& expected, std::span<const double> output) {
  constant_head(expected.mlp(), output, expected.low(), expected.high());
}

Minibatch random_minibatch(std::span<const AgentSpec> specs, std::size_t m, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution terminal(0.25);
  const std::size_t od = joint_obs_dim(specs);
  const std::size_t ad = joint_act_dim(specs);
  Minibatch b{Tensor({m, od}), Tensor({m, ad}), Tensor({m, specs.size()}), Tensor({m, od}), Tensor({m, 1})};
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t k = 0; k < od; ++k) {
      b.obs.at(s, k) = unit(rng);
      b.next_obs.at(s, k) = unit(rng);
    }
    std::size_t c = 0;
    for (const AgentSpec& spec : specs) {
      for (std::size_t k = 0; k < spec.act_dim; ++k, ++c) {
        std::uniform_real_distribution<double> inside(spec.act_low[k], spec.act_high[k]);
        b.actions.at(s, c) = inside(rng);
      }
    }
    for (std::size_t i = 0; i < specs.size(); ++i) b.rewards.at(s, i) = normal(rng);
    b.done[s] = terminal(rng) ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace mhmarl::verify
