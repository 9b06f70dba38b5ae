#include <gtest/gtest.h>

#include <algorithm>

#include "mhmarl/harness.hpp"
#include "mhmarl/metrics.hpp"

namespace mhmarl {
namespace {

TrainConfig small(std::string_view algorithm, std::size_t steps = 300) {
  TrainConfig c = preset(algorithm);
  c.env = "coordination";
  c.n_agents = 2;
  c.total_steps = steps;
  c.warmup = 64;
  c.hp.batch_size = 16;
  c.eval_every = 100;
  c.eval_episodes = 2;
  return c;
}

TEST(Train, SameSeedIsBitIdentical) {
  for (const char* algo : {"mh-maddpg", "mh-matd3"}) {
    const RunRecord a = train(small(algo), 7);
    const RunRecord b = train(small(algo), 7);
    EXPECT_EQ(format_metrics(a.metrics), format_metrics(b.metrics)) << algo;
    ASSERT_EQ(a.final_parameters.size(), b.final_parameters.size());
    for (std::size_t k = 0; k < a.final_parameters.size(); ++k) {
      EXPECT_EQ(a.final_parameters[k].value, b.final_parameters[k].value) << a.final_parameters[k].name;
    }
  }
}

TEST(Train, DifferentSeedsDiffer) {
  const RunRecord a = train(small("maddpg"), 1);
  const RunRecord b = train(small("maddpg"), 2);
  EXPECT_NE(a.final_parameters[0].value, b.final_parameters[0].value);
}

TEST(Train, RecordsCheckpointsAndCounters) {
  const RunRecord r = train(small("mh-maddpg", 250), 3);
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_EQ(r.metrics[0].step, 100u);
  EXPECT_EQ(r.metrics[2].step, 250u);
  EXPECT_EQ(r.env_steps, 250u);
  // Updates begin once the buffer holds max(warmup, batch) = 64 records.
  EXPECT_EQ(r.update_rounds, 250u - 63u);
  EXPECT_EQ(r.algorithm, "mh-maddpg");
  for (const auto& row : r.metrics) {
    EXPECT_NO_THROW(validate_row(row));
    EXPECT_EQ(row.seed, 3u);
  }
}

TEST(Train, DiagnosticsFollowTheAlgorithm) {
  const RunRecord base = train(small("maddpg"), 1);
  for (const auto& row : base.metrics) {
    EXPECT_TRUE(row.critic_loss.has_value());
    EXPECT_TRUE(row.actor_loss.has_value());
    EXPECT_FALSE(row.gate_rate.has_value());
    EXPECT_FALSE(row.help_loss.has_value());
    EXPECT_FALSE(row.alpha.has_value());
  }
  const RunRecord open = train(small("no-selectivity"), 1);
  for (const auto& row : open.metrics) {
    ASSERT_TRUE(row.gate_rate.has_value());
    EXPECT_EQ(*row.gate_rate, 1.0);
  }
  const RunRecord mh = train(small("mh-maddpg"), 1);
  for (const auto& row : mh.metrics) {
    ASSERT_TRUE(row.gate_rate.has_value());
    EXPECT_GE(*row.gate_rate, 0.0);
    EXPECT_LE(*row.gate_rate, 1.0);
    EXPECT_GE(*row.help_loss, 0.0);
    EXPECT_GE(*row.alpha, 0.0);
  }
  EXPECT_NO_THROW(train(small("no-marl"), 1));
}

TEST(Train, NoHelpPresetMatchesMaddpg) {
  const RunRecord a = train(small("maddpg"), 5);
  const RunRecord b = train(small("no-help"), 5);
  ASSERT_EQ(a.final_parameters.size(), b.final_parameters.size());
  for (std::size_t k = 0; k < a.final_parameters.size(); ++k) {
    EXPECT_EQ(a.final_parameters[k].value, b.final_parameters[k].value);
  }
}

TEST(Train, TwinBackendDelaysPolicyUpdates) {
  // With delay 2 the actor moves only on even rounds.
  TrainConfig c = small("mh-matd3", 70);
  std::vector<Tensor> actor_values;
  TrainHooks hooks;
  hooks.on_step = [&](std::size_t, const Learner& l) {
    actor_values.push_back(std::as_const(l.agents()[0].actor.online).parameters()[0]->value);
  };
  const RunRecord r = train(c, 1, &hooks);
  ASSERT_EQ(actor_values.size(), 70u);
  // Rounds 1..7 happen at steps 64..70 (indices 63..69).
  EXPECT_EQ(actor_values[63], actor_values[62]);  // round 1: critics only
  EXPECT_NE(actor_values[64], actor_values[63]);  // round 2: policy update
  EXPECT_EQ(actor_values[65], actor_values[64]);
  EXPECT_EQ(r.update_rounds, 7u);
}

TEST(Learner, ExplorationNoiseStaysInBounds) {
  const std::vector<AgentSpec> specs{AgentSpec::box(1, 1, -1, 1), AgentSpec::box(1, 1, 0.0, 0.1)};
  Learner learner(small("maddpg"), specs, 1);
  Rng noise(2);
  const std::vector<double> obs{0.3, -0.3};
  const auto clean = learner.act(obs);
  EXPECT_EQ(clean, learner.act(obs, &noise, 0.0));
  bool moved = false;
  for (int k = 0; k < 200; ++k) {
    const auto a = learner.act(obs, &noise, 5.0);
    EXPECT_GE(a[0], -1.0);
    EXPECT_LE(a[0], 1.0);
    EXPECT_GE(a[1], 0.0);
    EXPECT_LE(a[1], 0.1);
    moved = moved || a != clean;
  }
  EXPECT_TRUE(moved);
  EXPECT_THROW(learner.act(std::vector<double>{0.0}), std::invalid_argument);
}

TEST(Learner, SnapshotRestoreRoundTrip) {
  const auto specs = make_environment("flocking", 3)->specs();
  Learner a(preset("mh-matd3"), specs, 1);
  Learner b(preset("mh-matd3"), specs, 2);
  const auto saved = a.snapshot();
  // Online and target copies of actor and both critics, plus the expected net.
  EXPECT_EQ(saved.size(), 3u * 6u * (2 + 4 + 1));
  b.restore(saved);
  const auto back = b.snapshot();
  ASSERT_EQ(back.size(), saved.size());
  for (std::size_t k = 0; k < saved.size(); ++k) {
    EXPECT_EQ(back[k].name, saved[k].name);
    EXPECT_EQ(back[k].value, saved[k].value);
  }
  std::vector<Parameter> partial(saved.begin(), saved.end() - 1);
  EXPECT_THROW(b.restore(partial), std::runtime_error);
}

TEST(Evaluate, ZeroHeadActorsOnCoordinationGame) {
  const auto env = make_environment("coordination", 2);
  Rng rng(1);
  ActorNet a0("a0", env->specs()[0], rng), a1("a1", env->specs()[1], rng);
  a0.mlp().zero_head();
  a1.mlp().zero_head();
  const std::vector<const ActorNet*> actors{&a0, &a1};
  Rng eval_rng(3);
  const EvalResult r = evaluate(actors, *env, 4, eval_rng);
  EXPECT_EQ(r.success_rate, 0.0);
  ASSERT_EQ(r.agent_returns.size(), 2u);
  EXPECT_EQ(r.agent_returns[0], 0.0);
  EXPECT_EQ(r.agent_returns[1], -0.25);
  EXPECT_EQ(r.mean_return, -0.25);

  Rng again(3);
  const EvalResult shared = evaluate(actors, *env, 4, again, RewardScheme::global_sum);
  EXPECT_EQ(shared.agent_returns, (std::vector<double>{-0.25, -0.25}));
  EXPECT_EQ(shared.mean_return, -0.25);
  EXPECT_THROW(evaluate(actors, *env, 0, again), std::invalid_argument);
  EXPECT_THROW(evaluate(std::vector<const ActorNet*>{&a0}, *env, 1, again), std::invalid_argument);
}

TEST(Evaluate, SideEffectFree) {
  FlockingEnv env(3);
  Rng reset_rng(4);
  env.reset(reset_rng);
  const auto before_obs = env.observe();
  Learner learner(preset("mh-maddpg"), env.specs(), 9);
  const auto before = learner.snapshot();
  Rng eval_rng(5);
  const auto actors = learner.actors();
  const EvalResult r = evaluate(actors, env, 2, eval_rng);
  EXPECT_GE(r.success_rate, 0.0);
  EXPECT_LE(r.success_rate, 1.0);
  EXPECT_EQ(env.observe(), before_obs);
  EXPECT_EQ(env.state().step, 0u);
  const auto after = learner.snapshot();
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(after[k].value, before[k].value);
}

TEST(Suite, RejectsDuplicatesBeforeLaunch) {
  std::vector<RunRequest> reqs{{small("maddpg"), 1}, {small("maddpg"), 1}};
  EXPECT_THROW(run_suite(reqs, 1), std::invalid_argument);
  TrainConfig c = small("maddpg");
  c.seeds = {1, 2, 3};
  EXPECT_EQ(expand_seeds(c).size(), 3u);
}

TEST(Suite, ParallelismDoesNotChangeResults) {
  std::vector<RunRequest> reqs;
  for (const char* algo : {"maddpg", "mh-maddpg"}) {
    for (std::uint64_t seed : {1, 2}) reqs.push_back({small(algo, 150), seed});
  }
  const auto serial = run_suite(reqs, 1);
  std::size_t reported = 0;
  const auto parallel = run_suite(reqs, 3, [&](const RunOutcome&) { ++reported; });
  EXPECT_EQ(reported, reqs.size());
  ASSERT_EQ(serial.size(), 4u);
  for (std::size_t k = 0; k < serial.size(); ++k) {
    ASSERT_TRUE(serial[k].ok());
    ASSERT_TRUE(parallel[k].ok());
    EXPECT_EQ(serial[k].algorithm, reqs[k].config.algorithm_name());
    EXPECT_EQ(serial[k].seed, reqs[k].seed);
    EXPECT_EQ(format_metrics(serial[k].record->metrics), format_metrics(parallel[k].record->metrics));
  }
}

TEST(Suite, OneAbortingRunLeavesOthersComplete) {
  TrainConfig broken = small("mh-maddpg", 200);
  broken.algorithm = "exploding";
  broken.hp.lr_critic = 1e300;
  broken.hp.lr_actor = 1e300;
  std::vector<RunRequest> reqs{{small("maddpg", 120), 1}, {broken, 1}, {small("mh-maddpg", 120), 1}};
  const auto out = run_suite(reqs, 2);
  EXPECT_TRUE(out[0].ok());
  EXPECT_FALSE(out[1].ok());
  EXPECT_NE(out[1].error.find("non-finite"), std::string::npos) << out[1].error;
  EXPECT_TRUE(out[2].ok());
  EXPECT_THROW(train(broken, 1), NonFiniteLoss);
}

TEST(Streams, AreIndependentAndSeeded) {
  Rng a = make_rng(1, Stream::env), b = make_rng(1, Stream::env);
  Rng c = make_rng(1, Stream::sampling), d = make_rng(2, Stream::env);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

}  // namespace
}  // namespace mhmarl
