#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhmarl/adam.hpp"
#include "mhmarl/config.hpp"
#include "mhmarl/envs.hpp"
#include "mhmarl/losses.hpp"
#include "mhmarl/metrics.hpp"
#include "mhmarl/networks.hpp"
#include "mhmarl/replay_buffer.hpp"

namespace mhmarl {

// Independent generator streams derived from one run seed.
enum class Stream : std::uint32_t {
  init = 1,
  init_expected = 2,
  init_twin = 3,
  env = 4,
  exploration = 5,
  sampling = 6,
  smoothing = 7,
  evaluation = 8,
};

Rng make_rng(std::uint64_t seed, Stream stream);

// Stops glibc from handing freed graph memory back to the OS after every
// update, which otherwise costs page faults on the next one. Call once from
// main; no effect elsewhere.
void keep_heap_resident();

// Raised when any loss becomes NaN or infinite during training.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentModels {
  TargetPair<ActorNet> actor;
  std::vector<TargetPair<CriticNet>> critics;  // two for the twin-critic backend
  std::optional<ExpectedNet> expected;
  AdamState actor_opt;
  std::vector<AdamState> critic_opt;
  std::optional<AdamState> expected_opt;
};

// Loss diagnostics of one update round, averaged over agents.
struct UpdateStats {
  double critic_loss = 0.0;
  std::optional<double> actor_loss;
  std::optional<double> help_loss;
  std::optional<double> expected_loss;
  std::optional<double> alpha;
  std::optional<double> gate_rate;
};

// All networks and optimiser state of one run, plus the update rule.
class Learner {
 public:
  Learner(TrainConfig config, std::vector<AgentSpec> specs, std::uint64_t seed);

  // pi_i(o_i) for every agent, plus Gaussian noise of stddev sigma when
  // noise_rng is given, clamped to the action bounds.
  std::vector<double> act(std::span<const double> joint_obs, Rng* noise_rng = nullptr, double sigma = 0.0) const;

  // One round of updates: for each agent in index order, sample a fresh
  // minibatch, update the actor, the critic(s), then the expected policy;
  // finally soft-update every target network. `step` labels diagnostics.
  UpdateStats update(const ReplayBuffer& buffer, Rng& sampling, Rng& smoothing, std::size_t step);

  std::vector<const ActorNet*> actors() const;
  const std::vector<AgentModels>& agents() const { return agents_; }
  const std::vector<AgentSpec>& specs() const { return specs_; }
  std::size_t update_rounds() const { return rounds_; }

  // Named copies of every network parameter (online and target).
  std::vector<Parameter> snapshot() const;
  void restore(std::span<const Parameter> saved);

 private:
  std::vector<Parameter*> all_parameters();

  TrainConfig config_;
  std::vector<AgentSpec> specs_;
  std::vector<AgentModels> agents_;
  std::size_t rounds_ = 0;
};

struct EvalResult {
  double success_rate = 0.0;
  std::vector<double> agent_returns;  // undiscounted, averaged over episodes
  double mean_return = 0.0;           // team return: sum of local rewards
};

// Runs noise-free episodes on a copy of `env`; neither `env` nor the actors
// are modified. Under the global-sum scheme each agent's return is reported as
// the shared reward.
EvalResult evaluate(std::span<const ActorNet* const> actors, const Environment& env, std::size_t episodes, Rng& rng,
                    RewardScheme scheme = RewardScheme::local);

struct RunRecord {
  TrainConfig config;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::vector<MetricsRow> metrics;
  std::vector<Parameter> final_parameters;
  EvalResult final_eval;
  std::size_t env_steps = 0;
  std::size_t update_rounds = 0;
  std::size_t clamped_actions = 0;
  double wall_seconds = 0.0;
};

struct TrainHooks {
  // Called after every environment step (and the update that follows it).
  std::function<void(std::size_t step, const Learner&)> on_step;
};

RunRecord train(const TrainConfig& config, std::uint64_t seed, const TrainHooks* hooks = nullptr);

struct RunRequest {
  TrainConfig config;
  std::uint64_t seed = 0;
};

struct RunOutcome {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::optional<RunRecord> record;
  std::string error;

  bool ok() const { return record.has_value(); }
};

// One request per seed in config.seeds.
std::vector<RunRequest> expand_seeds(const TrainConfig& config);

// Runs every request on up to `parallelism` threads. Results come back in
// request order; a failing run reports its error without stopping the others.
// Throws std::invalid_argument before launching anything if two requests
// share an (algorithm, seed) pair.
std::vector<RunOutcome> run_suite(std::span<const RunRequest> requests, std::size_t parallelism,
                                  const std::function<void(const RunOutcome&)>& on_done = {});

}  // namespace mhmarl
