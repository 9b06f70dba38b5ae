#include "mhmarl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <utility>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace mhmarl {

Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x4d48u};
  return Rng(seq);
}

void keep_heap_resident() {
#ifdef __GLIBC__
  constexpr int kBytes = 256 << 20;
  mallopt(M_TRIM_THRESHOLD, kBytes);
  mallopt(M_MMAP_THRESHOLD, kBytes);
#endif
}

namespace {

constexpr std::string_view kTargetPrefix = "target:";

template <typename Fn>
auto guarded(std::string_view what, std::size_t agent, std::size_t step, Fn&& fn) {
  try {
    return fn();
  } catch (const std::domain_error& e) {
    throw NonFiniteLoss(std::string(what) + " became non-finite for agent " + std::to_string(agent) + " at step " +
                        std::to_string(step) + ": " + e.what());
  }
}

void descend(Graph& g, Var loss, std::vector<Parameter*> params, AdamState& opt, double lr) {
  const auto grads = g.backward(loss).for_parameters(params);
  adam_step(params, grads, opt, lr);
}

}  // namespace

Learner::Learner(TrainConfig config, std::vector<AgentSpec> specs, std::uint64_t seed)
    : config_(std::move(config)), specs_(std::move(specs)) {
  config_.validate();
  Rng init = make_rng(seed, Stream::init);
  Rng init_expected = make_rng(seed, Stream::init_expected);
  Rng init_twin = make_rng(seed, Stream::init_twin);
  const std::size_t n = specs_.size();
  agents_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "agent" + std::to_string(i);
    ActorNet actor(prefix + ".actor", specs_[i], init);
    CriticNet critic(prefix + ".critic", specs_, init);
    std::vector<TargetPair<CriticNet>> critics;
    critics.emplace_back(std::move(critic));
    if (config_.backend == Backend::matd3) {
      critics.emplace_back(CriticNet(prefix + ".critic2", specs_, init_twin));
    }
    std::optional<ExpectedNet> expected;
    if (config_.mutual_help) expected.emplace(prefix + ".expected", specs_, i, init_expected);

    AgentModels m{TargetPair<ActorNet>(std::move(actor)), std::move(critics), std::move(expected), {}, {}, {}};
    m.actor_opt = AdamState::for_parameters(m.actor.online.parameters());
    for (auto& c : m.critics) m.critic_opt.push_back(AdamState::for_parameters(c.online.parameters()));
    if (m.expected) m.expected_opt = AdamState::for_parameters(m.expected->parameters());
    agents_.push_back(std::move(m));
  }
}

std::vector<double> Learner::act(std::span<const double> joint_obs, Rng* noise_rng, double sigma) const {
  if (joint_obs.size() != joint_obs_dim(specs_)) throw std::invalid_argument("act: joint observation length");
  std::vector<double> joint;
  joint.reserve(joint_act_dim(specs_));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto a = agents_[i].actor.online.act(joint_obs.subspan(offset, specs_[i].obs_dim));
    offset += specs_[i].obs_dim;
    if (noise_rng != nullptr && sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, sigma);
      for (std::size_t k = 0; k < a.size(); ++k) {
        a[k] = std::clamp(a[k] + noise(*noise_rng), specs_[i].act_low[k], specs_[i].act_high[k]);
      }
    }
    joint.insert(joint.end(), a.begin(), a.end());
  }
  return joint;
}

std::vector<const ActorNet*> Learner::actors() const {
  std::vector<const ActorNet*> out;
  for (const auto& a : agents_) out.push_back(&a.actor.online);
  return out;
}

UpdateStats Learner::update(const ReplayBuffer& buffer, Rng& sampling, Rng& smoothing, std::size_t step) {
  ++rounds_;
  const bool twin = config_.backend == Backend::matd3;
  const bool policy_round = !twin || rounds_ % config_.policy_delay == 0;
  const HyperParams& hp = config_.hp;
  const std::size_t n = agents_.size();

  std::vector<const ActorNet*> target_actors;
  for (const auto& a : agents_) target_actors.push_back(&a.actor.target);
  TargetSmoothing smooth{config_.target_noise, config_.target_noise_clip, &smoothing};

  double critic_sum = 0.0, actor_sum = 0.0, help_sum = 0.0, expected_sum = 0.0, alpha_sum = 0.0, gate_sum = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    AgentModels& me = agents_[i];
    const Minibatch batch = buffer.sample(hp.batch_size, sampling);

    std::vector<const QFunction*> target_critics;
    for (const auto& c : me.critics) target_critics.push_back(&c.target);
    const Tensor y = guarded("TD target", i, step, [&] {
      return td_target(batch, i, target_critics, target_actors, hp.gamma, twin ? &smooth : nullptr);
    });

    if (policy_round) {
      guarded("actor loss", i, step, [&] {
        Graph g;
        const PolicyEval eval = evaluate_policy(g, batch, i, me.actor.online, me.critics[0].online, true);
        Var baseline = actor_loss(g, eval);
        Var objective = baseline;
        actor_sum += g.value(baseline).item();
        if (config_.mutual_help) {
          std::vector<const ExpectedNet*> teachers;
          for (std::size_t j = 0; j < n; ++j) {
            if (j != i) teachers.push_back(&*agents_[j].expected);
          }
          const HelpLoss help = help_loss(g, eval, me.critics[0].online, teachers, hp.eta, config_.selectivity);
          const double alpha = mix_ratio_alpha(g, eval, hp.beta);
          objective = mh_actor_loss(g, baseline, help.loss, alpha, config_.marl_term);
          help_sum += g.value(help.loss).item();
          alpha_sum += alpha;
          gate_sum += help.gate_rate;
        }
        descend(g, objective, me.actor.online.parameters(), me.actor_opt, hp.lr_actor);
        return 0;
      });
    }

    for (std::size_t k = 0; k < me.critics.size(); ++k) {
      guarded("critic loss", i, step, [&] {
        Graph g;
        Var loss = critic_loss(g, me.critics[k].online, batch, y);
        if (k == 0) critic_sum += g.value(loss).item();
        descend(g, loss, me.critics[k].online.parameters(), me.critic_opt[k], hp.lr_critic);
        return 0;
      });
    }

    if (config_.mutual_help && policy_round) {
      guarded("expected-policy loss", i, step, [&] {
        Graph g;
        Var loss = expected_loss(g, *me.expected, me.critics[0].online, me.actor.online, batch);
        expected_sum += g.value(loss).item();
        descend(g, loss, me.expected->parameters(), *me.expected_opt, hp.lr_expected);
        return 0;
      });
    }
  }

  if (policy_round) {
    for (auto& m : agents_) {
      m.actor.soft_update(hp.tau);
      for (auto& c : m.critics) c.soft_update(hp.tau);
    }
  }

  const double inv = 1.0 / static_cast<double>(n);
  UpdateStats stats;
  stats.critic_loss = critic_sum * inv;
  if (policy_round) {
    stats.actor_loss = actor_sum * inv;
    if (config_.mutual_help) {
      stats.help_loss = help_sum * inv;
      stats.expected_loss = expected_sum * inv;
      stats.alpha = alpha_sum * inv;
      stats.gate_rate = gate_sum * inv;
    }
  }
  return stats;
}

std::vector<Parameter*> Learner::all_parameters() {
  std::vector<Parameter*> out;
  for (auto& m : agents_) {
    for (Parameter* p : m.actor.online.parameters()) out.push_back(p);
    for (auto& c : m.critics) {
      for (Parameter* p : c.online.parameters()) out.push_back(p);
    }
    if (m.expected) {
      for (Parameter* p : m.expected->parameters()) out.push_back(p);
    }
  }
  return out;
}

std::vector<Parameter> Learner::snapshot() const {
  std::vector<Parameter> out;
  auto add = [&](auto params, bool target) {
    for (const Parameter* p : params) {
      out.push_back(Parameter{target ? std::string(kTargetPrefix) + p->name : p->name, p->value});
    }
  };
  for (const auto& m : agents_) {
    add(m.actor.online.parameters(), false);
    add(m.actor.target.parameters(), true);
    for (const auto& c : m.critics) {
      add(c.online.parameters(), false);
      add(c.target.parameters(), true);
    }
    if (m.expected) add(std::as_const(*m.expected).parameters(), false);
  }
  return out;
}

void Learner::restore(std::span<const Parameter> saved) {
  std::unordered_map<std::string, const Parameter*> by_name;
  for (const Parameter& p : saved) by_name.emplace(p.name, &p);
  auto load = [&](std::vector<Parameter*> params, bool target) {
    for (Parameter* p : params) {
      const std::string key = target ? std::string(kTargetPrefix) + p->name : p->name;
      auto it = by_name.find(key);
      if (it == by_name.end()) throw std::runtime_error("checkpoint lacks parameter '" + key + "'");
      if (it->second->value.shape() != p->value.shape()) {
        throw std::runtime_error("checkpoint parameter '" + key + "' has the wrong shape");
      }
      p->value = it->second->value;
    }
  };
  for (auto& m : agents_) {
    load(m.actor.online.parameters(), false);
    load(m.actor.target.parameters(), true);
    for (auto& c : m.critics) {
      load(c.online.parameters(), false);
      load(c.target.parameters(), true);
    }
    if (m.expected) load(m.expected->parameters(), false);
  }
}

EvalResult evaluate(std::span<const ActorNet* const> actors, const Environment& env, std::size_t episodes, Rng& rng,
                    RewardScheme scheme) {
  if (episodes == 0) throw std::invalid_argument("evaluate: episodes must be positive");
  const auto& specs = env.specs();
  if (actors.size() != specs.size()) throw std::invalid_argument("evaluate: one actor per agent required");
  auto sim = env.clone();
  const std::size_t n = specs.size();
  EvalResult out;
  out.agent_returns.assign(n, 0.0);
  std::size_t successes = 0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    std::vector<double> obs = sim->reset(rng);
    bool done = false;
    while (!done) {
      std::vector<double> joint;
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n; ++i) {
        auto a = actors[i]->act(std::span<const double>(obs).subspan(offset, specs[i].obs_dim));
        offset += specs[i].obs_dim;
        joint.insert(joint.end(), a.begin(), a.end());
      }
      StepResult res = sim->step(joint);
      double team = 0.0;
      for (double r : res.rewards) team += r;
      out.mean_return += team;
      for (std::size_t i = 0; i < n; ++i) {
        out.agent_returns[i] += scheme == RewardScheme::global_sum ? team : res.rewards[i];
      }
      done = res.done;
      if (done && res.info.success) ++successes;
      obs = std::move(res.next_obs);
    }
  }
  const double e = static_cast<double>(episodes);
  out.success_rate = static_cast<double>(successes) / e;
  out.mean_return /= e;
  for (double& r : out.agent_returns) r /= e;
  return out;
}

namespace {

struct DiagnosticAverage {
  std::size_t count = 0;
  double sum = 0.0;

  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  std::optional<double> take() {
    std::optional<double> out;
    if (count > 0) out = sum / static_cast<double>(count);
    *this = {};
    return out;
  }
};

}  // namespace

RunRecord train(const TrainConfig& config, std::uint64_t seed, const TrainHooks* hooks) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  auto env = make_environment(config.env, config.n_agents);
  const auto specs = env->specs();
  Learner learner(config, specs, seed);
  ReplayBuffer buffer(specs, config.buffer_capacity);

  Rng env_rng = make_rng(seed, Stream::env);
  Rng noise_rng = make_rng(seed, Stream::exploration);
  Rng sampling_rng = make_rng(seed, Stream::sampling);
  Rng smoothing_rng = make_rng(seed, Stream::smoothing);

  RunRecord record;
  record.config = config;
  record.seed = seed;
  record.algorithm = config.algorithm_name();

  DiagnosticAverage critic, actor, help, expected, alpha, gate;
  const std::size_t ready = std::max(config.warmup, config.hp.batch_size);
  const double decay_span = config.total_steps > 1 ? static_cast<double>(config.total_steps - 1) : 1.0;

  std::vector<double> obs = env->reset(env_rng);
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    const double progress = static_cast<double>(step - 1) / decay_span;
    const double sigma = config.noise_sigma_start + (config.noise_sigma_end - config.noise_sigma_start) * progress;
    std::vector<double> action = learner.act(obs, &noise_rng, sigma);
    StepResult res = env->step(action);

    Transition t{obs, std::move(action), res.rewards, res.next_obs, res.done};
    if (config.reward_scheme == RewardScheme::global_sum) {
      double team = 0.0;
      for (double r : res.rewards) team += r;
      std::fill(t.rewards.begin(), t.rewards.end(), team);
    }
    buffer.push(t);
    obs = res.done ? env->reset(env_rng) : std::move(res.next_obs);

    if (buffer.size() >= ready) {
      const UpdateStats s = learner.update(buffer, sampling_rng, smoothing_rng, step);
      critic.add(s.critic_loss);
      actor.add(s.actor_loss);
      help.add(s.help_loss);
      expected.add(s.expected_loss);
      alpha.add(s.alpha);
      gate.add(s.gate_rate);
    }
    if (hooks != nullptr && hooks->on_step) hooks->on_step(step, learner);

    if (step % config.eval_every == 0 || step == config.total_steps) {
      Rng eval_rng = make_rng(seed, Stream::evaluation);
      const auto actors = learner.actors();
      record.final_eval = evaluate(actors, *env, config.eval_episodes, eval_rng, config.reward_scheme);
      MetricsRow row;
      row.step = step;
      row.seed = seed;
      row.algorithm = record.algorithm;
      row.success_rate = record.final_eval.success_rate;
      row.mean_return = record.final_eval.mean_return;
      row.critic_loss = critic.take();
      row.actor_loss = actor.take();
      row.help_loss = help.take();
      row.expected_loss = expected.take();
      row.alpha = alpha.take();
      row.gate_rate = gate.take();
      record.metrics.push_back(std::move(row));
    }
  }

  record.final_parameters = learner.snapshot();
  record.env_steps = config.total_steps;
  record.update_rounds = learner.update_rounds();
  record.clamped_actions = env->clamped_actions();
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

std::vector<RunRequest> expand_seeds(const TrainConfig& config) {
  std::vector<RunRequest> out;
  for (std::uint64_t s : config.seeds) out.push_back(RunRequest{config, s});
  return out;
}

std::vector<RunOutcome> run_suite(std::span<const RunRequest> requests, std::size_t parallelism,
                                  const std::function<void(const RunOutcome&)>& on_done) {
  std::set<std::pair<std::string, std::uint64_t>> keys;
  for (const auto& r : requests) {
    if (!keys.emplace(r.config.algorithm_name(), r.seed).second) {
      throw std::invalid_argument("duplicate run (" + r.config.algorithm_name() + ", seed " + std::to_string(r.seed) +
                                  ")");
    }
  }

  std::vector<RunOutcome> results(requests.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (std::size_t k = next++; k < requests.size(); k = next++) {
      RunOutcome& out = results[k];
      out.algorithm = requests[k].config.algorithm_name();
      out.seed = requests[k].seed;
      try {
        out.record = train(requests[k].config, requests[k].seed);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      if (on_done) {
        std::lock_guard lock(report);
        on_done(out);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(requests.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace mhmarl
