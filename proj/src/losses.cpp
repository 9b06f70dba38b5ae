#include "mhmarl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mhmarl {

void Minibatch::validate(std::span<const AgentSpec> specs) const {
  const std::size_t m = obs.rows();
  const std::size_t od = joint_obs_dim(specs);
  const std::size_t ad = joint_act_dim(specs);
  auto check = [&](const Tensor& t, std::size_t cols, const char* what) {
    if (t.shape().size() != 2 || t.rows() != m || t.cols() != cols) {
      throw std::invalid_argument(std::string("minibatch ") + what + " has shape " + shape_string(t.shape()) +
                                  ", expected [" + std::to_string(m) + ", " + std::to_string(cols) + "]");
    }
  };
  check(obs, od, "obs");
  check(actions, ad, "actions");
  check(rewards, specs.size(), "rewards");
  check(next_obs, od, "next_obs");
  check(done, 1, "done");
}

void HyperParams::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(lr_actor > 0.0 && lr_critic > 0.0 && lr_expected > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
}

Var agent_obs(Graph& g, std::span<const AgentSpec> specs, Var joint_obs, std::size_t i) {
  const std::size_t begin = obs_offset(specs, i);
  return g.slice(joint_obs, begin, begin + specs[i].obs_dim);
}

Var substitute_action(Graph& g, std::span<const AgentSpec> specs, Var joint_actions, std::size_t i, Var own) {
  if (g.value(own).cols() != specs[i].act_dim) {
    throw std::invalid_argument("substituted action for agent " + std::to_string(i) + " has shape " +
                                shape_string(g.shape(own)));
  }
  const std::size_t begin = act_offset(specs, i);
  const std::size_t end = begin + specs[i].act_dim;
  const std::size_t total = joint_act_dim(specs);
  std::vector<Var> parts;
  if (begin > 0) parts.push_back(g.slice(joint_actions, 0, begin));
  parts.push_back(own);
  if (end < total) parts.push_back(g.slice(joint_actions, end, total));
  return parts.size() == 1 ? own : g.concat(parts);
}

Tensor td_target(const Minibatch& batch, std::size_t agent, std::span<const QFunction* const> target_critics,
                 std::span<const ActorNet* const> target_actors, double gamma, const TargetSmoothing* smoothing) {
  if (target_critics.empty() || target_critics.size() > 2) {
    throw std::invalid_argument("td_target takes one or two target critics");
  }
  const auto& specs = target_critics[0]->specs();
  if (target_actors.size() != specs.size()) {
    throw std::invalid_argument("td_target needs one target actor per agent");
  }
  if (agent >= specs.size()) throw std::invalid_argument("td_target: agent index out of range");
  batch.validate(specs);

  Graph g;
  Var next_obs = g.constant(batch.next_obs);
  std::vector<Var> next_actions;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    Var a = target_actors[j]->forward(g, agent_obs(g, specs, next_obs, j), false);
    if (smoothing != nullptr) {
      Tensor noisy = g.value(a);
      std::normal_distribution<double> noise(0.0, smoothing->stddev);
      for (std::size_t r = 0; r < noisy.rows(); ++r) {
        for (std::size_t c = 0; c < noisy.cols(); ++c) {
          const double eps = std::clamp(noise(*smoothing->rng), -smoothing->clip, smoothing->clip);
          noisy.at(r, c) = std::clamp(noisy.at(r, c) + eps, specs[j].act_low[c], specs[j].act_high[c]);
        }
      }
      a = g.constant(std::move(noisy));
    }
    next_actions.push_back(a);
  }
  Var joint_next = g.concat(next_actions);

  Tensor bootstrap = g.value(target_critics[0]->evaluate(g, next_obs, joint_next, false));
  if (target_critics.size() == 2) {
    const Tensor& other = g.value(target_critics[1]->evaluate(g, next_obs, joint_next, false));
    bootstrap.matrix() = bootstrap.matrix().cwiseMin(other.matrix());
  }

  Tensor y({batch.size(), 1});
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double r = batch.rewards.at(s, agent);
    y[s] = batch.done[s] != 0.0 ? r : r + gamma * bootstrap[s];
  }
  return y;
}

Var critic_loss(Graph& g, const QFunction& critic, const Minibatch& batch, const Tensor& y) {
  batch.validate(critic.specs());
  if (y.shape() != Shape{batch.size(), 1}) {
    throw std::invalid_argument("critic_loss: targets have shape " + shape_string(y.shape()));
  }
  Var q = critic.evaluate(g, g.constant(batch.obs), g.constant(batch.actions), true);
  return g.mean(g.square(g.sub(q, g.constant(y))));
}

PolicyEval evaluate_policy(Graph& g, const Minibatch& batch, std::size_t agent, const ActorNet& actor,
                           const QFunction& critic, bool actor_trainable) {
  const auto& specs = critic.specs();
  if (agent >= specs.size()) throw std::invalid_argument("evaluate_policy: agent index out of range");
  batch.validate(specs);
  PolicyEval e;
  e.agent = agent;
  e.obs = g.constant(batch.obs);
  e.actions = g.constant(batch.actions);
  e.own_action = actor.forward(g, agent_obs(g, specs, e.obs, agent), actor_trainable);
  e.q = critic.evaluate(g, e.obs, substitute_action(g, specs, e.actions, agent, e.own_action), false);
  return e;
}

Var actor_loss(Graph& g, const PolicyEval& eval) { return g.scale(g.mean(eval.q), -1.0); }

Var actor_loss(Graph& g, const ActorNet& actor, const QFunction& critic, const Minibatch& batch, std::size_t agent) {
  return actor_loss(g, evaluate_policy(g, batch, agent, actor, critic, true));
}

Var expected_loss(Graph& g, const ExpectedNet& expected, const QFunction& critic, const ActorNet& actor,
                  const Minibatch& batch) {
  const auto& specs = critic.specs();
  const std::size_t owner = expected.owner();
  batch.validate(specs);
  Var obs = g.constant(batch.obs);
  Var own = g.stop_gradient(actor.forward(g, agent_obs(g, specs, obs, owner), false));
  Var mu = expected.forward(g, obs, true);
  std::vector<Var> parts;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    parts.push_back(j == owner ? own : expected.mu_slice(g, mu, j));
  }
  Var q = critic.evaluate(g, obs, g.concat(parts), false);
  return g.scale(g.mean(q), -1.0);
}

double step_eps(double x) { return x > 0.0 ? 1.0 : 0.0; }

HelpLoss help_loss(Graph& g, const PolicyEval& own, const QFunction& critic,
                   std::span<const ExpectedNet* const> teachers, double eta, bool selective) {
  const auto& specs = critic.specs();
  const std::size_t n = specs.size();
  const std::size_t i = own.agent;
  if (n < 2) throw std::invalid_argument("help_loss needs at least two agents");
  if (!(eta > 0.0)) throw std::invalid_argument("help_loss: eta must be positive");
  if (teachers.size() != n - 1) {
    throw std::invalid_argument("help_loss: expected " + std::to_string(n - 1) + " teachers, got " +
                                std::to_string(teachers.size()));
  }
  std::vector<bool> seen(n, false);
  for (const ExpectedNet* t : teachers) {
    if (t->owner() == i || t->owner() >= n || seen[t->owner()]) {
      throw std::invalid_argument("help_loss: teachers must be the expected policies of the other agents");
    }
    seen[t->owner()] = true;
  }

  const Tensor& q_own = g.value(own.q);
  const std::size_t m = q_own.rows();
  HelpLoss out;
  out.gates = Tensor({m, teachers.size()});
  std::size_t open = 0;
  Var total{};
  for (std::size_t t = 0; t < teachers.size(); ++t) {
    Var mu_all = g.stop_gradient(teachers[t]->forward(g, own.obs, false));
    Var wanted = teachers[t]->mu_slice(g, mu_all, i);
    Tensor gate({m, 1}, 1.0);
    if (selective) {
      Var q_sub = critic.evaluate(g, own.obs, substitute_action(g, specs, own.actions, i, wanted), false);
      const Tensor& qs = g.value(q_sub);
      for (std::size_t s = 0; s < m; ++s) gate[s] = step_eps(qs[s] + eta - q_own[s]);
    }
    for (std::size_t s = 0; s < m; ++s) {
      out.gates.at(s, t) = gate[s];
      open += gate[s] != 0.0;
    }
    Var distance = g.l2_norm(g.sub(own.own_action, wanted));
    Var term = g.mul(distance, g.constant(std::move(gate)));
    out.terms.push_back(term);
    total = t == 0 ? term : g.add(total, term);
  }
  out.loss = g.mean(g.scale(total, 1.0 / static_cast<double>(n - 1)));
  out.gate_rate = static_cast<double>(open) / static_cast<double>(m * teachers.size());
  return out;
}

HelpLoss help_loss(Graph& g, const ActorNet& actor, const QFunction& critic,
                   std::span<const ExpectedNet* const> teachers, const Minibatch& batch, std::size_t agent,
                   double eta, bool selective) {
  return help_loss(g, evaluate_policy(g, batch, agent, actor, critic, true), critic, teachers, eta, selective);
}

double mix_ratio_alpha(Graph& g, const PolicyEval& own, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("mix ratio: beta must be positive");
  return beta * g.value(g.mean(g.abs(g.stop_gradient(own.q)))).item();
}

double mix_ratio_alpha(const ActorNet& actor, const QFunction& critic, const Minibatch& batch, std::size_t agent,
                       double beta) {
  Graph g;
  return mix_ratio_alpha(g, evaluate_policy(g, batch, agent, actor, critic, false), beta);
}

Var mh_actor_loss(Graph& g, Var actor_term, Var help_term, double alpha, bool include_actor_term) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("mix ratio must be non-negative");
  Var helped = g.scale(help_term, alpha);
  return include_actor_term ? g.add(actor_term, helped) : helped;
}

double mh_actor_loss(double actor_term, double help_term, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("mix ratio must be non-negative");
  return actor_term + alpha * help_term;
}

}  // namespace mhmarl
