#include "reference_maddpg.hpp"

#include <algorithm>
#include <stdexcept>

#include "mhmarl/adam.hpp"
#include "mhmarl/envs.hpp"
#include "mhmarl/harness.hpp"
#include "mhmarl/networks.hpp"
#include "mhmarl/replay_buffer.hpp"

namespace mhmarl::reference {

namespace {

struct Agent {
  ActorNet actor, actor_target;
  CriticNet critic, critic_target;
  AdamState actor_opt, critic_opt;
};

void blend(std::vector<Parameter*> target, std::vector<Parameter*> online, double tau) {
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto t = target[k]->value.data();
    auto o = online[k]->value.data();
    for (std::size_t e = 0; e < t.size(); ++e) t[e] = tau * o[e] + (1.0 - tau) * t[e];
  }
}

void descend(Graph& g, Var loss, std::vector<Parameter*> params, AdamState& opt, double lr) {
  adam_step(params, g.backward(loss).for_parameters(params), opt, lr);
}

// Column slice of a batch tensor as a graph constant.
Var columns(Graph& g, const Tensor& t, std::size_t begin, std::size_t end) {
  return g.slice(g.constant(t), begin, end);
}

}  // namespace

void run_maddpg(const TrainConfig& config, std::uint64_t seed, const StepObserver& observe) {
  if (config.backend != Backend::maddpg || config.mutual_help || config.reward_scheme != RewardScheme::local) {
    throw std::invalid_argument("reference loop covers plain MADDPG only");
  }
  auto env = make_environment(config.env, config.n_agents);
  const std::vector<AgentSpec> specs = env->specs();
  const std::size_t n = specs.size();
  const HyperParams& hp = config.hp;

  Rng init = make_rng(seed, Stream::init);
  std::vector<Agent> agents;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "agent" + std::to_string(i);
    ActorNet actor(prefix + ".actor", specs[i], init);
    CriticNet critic(prefix + ".critic", specs, init);
    Agent a{actor, actor, critic, critic, {}, {}};
    a.actor_opt = AdamState::for_parameters(a.actor.parameters());
    a.critic_opt = AdamState::for_parameters(a.critic.parameters());
    agents.push_back(std::move(a));
  }

  ReplayBuffer buffer(specs, config.buffer_capacity);
  Rng env_rng = make_rng(seed, Stream::env);
  Rng noise_rng = make_rng(seed, Stream::exploration);
  Rng sampling_rng = make_rng(seed, Stream::sampling);

  const std::size_t ready = std::max(config.warmup, hp.batch_size);
  const double span = config.total_steps > 1 ? static_cast<double>(config.total_steps - 1) : 1.0;
  const std::size_t ad = joint_act_dim(specs);

  std::vector<double> obs = env->reset(env_rng);
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    const double sigma =
        config.noise_sigma_start +
        (config.noise_sigma_end - config.noise_sigma_start) * (static_cast<double>(step - 1) / span);
    std::vector<double> action;
    std::size_t o_off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto a = agents[i].actor.act(std::span<const double>(obs).subspan(o_off, specs[i].obs_dim));
      o_off += specs[i].obs_dim;
      if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        for (std::size_t k = 0; k < a.size(); ++k) {
          a[k] = std::clamp(a[k] + noise(noise_rng), specs[i].act_low[k], specs[i].act_high[k]);
        }
      }
      action.insert(action.end(), a.begin(), a.end());
    }
    StepResult res = env->step(action);
    buffer.push(Transition{obs, action, res.rewards, res.next_obs, res.done});
    obs = res.done ? env->reset(env_rng) : std::move(res.next_obs);

    if (buffer.size() >= ready) {
      for (std::size_t i = 0; i < n; ++i) {
        Agent& me = agents[i];
        const Minibatch b = buffer.sample(hp.batch_size, sampling_rng);
        const std::size_t m = b.size();

        // Bootstrap target from every agent's target actor.
        Tensor y({m, 1});
        {
          Graph g;
          std::vector<Var> next_actions;
          std::size_t off = 0;
          for (std::size_t j = 0; j < n; ++j) {
            Var oj = columns(g, b.next_obs, off, off + specs[j].obs_dim);
            off += specs[j].obs_dim;
            next_actions.push_back(agents[j].actor_target.forward(g, oj, false));
          }
          const Tensor& q_next =
              g.value(me.critic_target.forward(g, g.constant(b.next_obs), g.concat(next_actions), false));
          for (std::size_t s = 0; s < m; ++s) {
            const double r = b.rewards.at(s, i);
            y[s] = b.done[s] != 0.0 ? r : r + hp.gamma * q_next[s];
          }
        }

        // Actor: ascend Q_i with agent i's recorded action replaced by pi_i(o_i).
        {
          Graph g;
          Var joint_obs = g.constant(b.obs);
          const std::size_t ob = obs_offset(specs, i);
          Var own = me.actor.forward(g, g.slice(joint_obs, ob, ob + specs[i].obs_dim), true);
          Var recorded = g.constant(b.actions);
          const std::size_t ab = act_offset(specs, i);
          const std::size_t ae = ab + specs[i].act_dim;
          std::vector<Var> parts;
          if (ab > 0) parts.push_back(g.slice(recorded, 0, ab));
          parts.push_back(own);
          if (ae < ad) parts.push_back(g.slice(recorded, ae, ad));
          Var joint = parts.size() == 1 ? own : g.concat(parts);
          Var q = me.critic.forward(g, joint_obs, joint, false);
          descend(g, g.scale(g.mean(q), -1.0), me.actor.parameters(), me.actor_opt, hp.lr_actor);
        }

        // Critic: squared TD error on the recorded joint action.
        {
          Graph g;
          Var q = me.critic.forward(g, g.constant(b.obs), g.constant(b.actions), true);
          Var loss = g.mean(g.square(g.sub(q, g.constant(y))));
          descend(g, loss, me.critic.parameters(), me.critic_opt, hp.lr_critic);
        }
      }
      for (Agent& a : agents) {
        blend(a.actor_target.parameters(), a.actor.parameters(), hp.tau);
        blend(a.critic_target.parameters(), a.critic.parameters(), hp.tau);
      }
    }

    std::vector<const Parameter*> params;
    for (const Agent& a : agents) {
      for (const ActorNet* net : {&a.actor, &a.actor_target}) {
        for (const Parameter* p : net->parameters()) params.push_back(p);
      }
      for (const CriticNet* net : {&a.critic, &a.critic_target}) {
        for (const Parameter* p : net->parameters()) params.push_back(p);
      }
    }
    observe(step, params);
  }
}

}  // namespace mhmarl::reference
