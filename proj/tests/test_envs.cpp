#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mhmarl/envs.hpp"

namespace mhmarl {
namespace {

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

FlockingEnv::State still(std::vector<Vec2> positions, Vec2 goal) {
  FlockingEnv::State s;
  s.velocity.assign(positions.size(), Vec2{0.0, 0.0});
  s.position = std::move(positions);
  s.goal = goal;
  return s;
}

TEST(Flocking, ObservationLayout) {
  FlockingEnv env(3);
  EXPECT_EQ(env.specs().size(), 3u);
  EXPECT_EQ(env.specs()[0].obs_dim, 14u);
  EXPECT_EQ(env.specs()[2].act_dim, 2u);
  EXPECT_EQ(FlockingEnv::obs_dim(5), 22u);
  auto s = still({{0.0, 0.0}, {1.0, 0.5}, {-0.5, 0.25}}, {1.0, 1.0});
  s.velocity[1] = {0.2, -0.1};
  env.set_state(s);
  const auto obs = env.observe();
  ASSERT_EQ(obs.size(), 42u);
  // Agent 1: own position, velocity, goal offset, then agents 0 and 2.
  const std::vector<double> agent1(obs.begin() + 14, obs.begin() + 28);
  EXPECT_EQ(agent1, (std::vector<double>{1.0, 0.5, 0.2, -0.1, 0.0, 0.5, -1.0, -0.5, -0.2, 0.1, -1.5, -0.25, -0.2, 0.1}));
}

TEST(Flocking, ResetRespectsSpawnRules) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    FlockingEnv env(3);
    Rng rng(seed);
    env.reset(rng);
    const auto& s = env.state();
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_LE(dist(s.position[i], FlockingEnv::kSpawnCenter), FlockingEnv::kSpawnRadius + 1e-12);
      EXPECT_EQ(s.velocity[i], (Vec2{0.0, 0.0}));
      for (std::size_t j = i + 1; j < 3; ++j) EXPECT_GE(dist(s.position[i], s.position[j]), FlockingEnv::kMinDistance);
    }
    for (double g : s.goal) {
      EXPECT_GE(g, 0.5);
      EXPECT_LE(g, 1.5);
    }
  }
}

TEST(Flocking, ResetDeterministicForSeed) {
  FlockingEnv a(3), b(3);
  Rng ra(11), rb(11);
  EXPECT_EQ(a.reset(ra), b.reset(rb));
  EXPECT_EQ(a.state().goal, b.state().goal);
}

TEST(Flocking, ImpossibleSpawnRejected) {
  // A disc of radius 0.5 cannot hold this many points 0.2 apart.
  FlockingEnv env(60);
  Rng rng(1);
  EXPECT_THROW(env.reset(rng), std::runtime_error);
  EXPECT_THROW(FlockingEnv(1), std::invalid_argument);
}

TEST(Flocking, RewardExamples) {
  FlockingEnv env(3);
  // Agent 0 on the goal, neighbours at 0.5 (inside both bands).
  env.set_state(still({{1.0, 1.0}, {1.5, 1.0}, {1.0, 1.5}}, {1.0, 1.0}));
  auto r = env.rewards();
  EXPECT_EQ(r[0], 5.0);
  // Agents 0 and 1 collide at distance 0.1; agent 2 sits 0.5 away.
  env.set_state(still({{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.5}}, {1.0, 1.0}));
  r = env.rewards();
  EXPECT_DOUBLE_EQ(r[0], -0.05 * std::hypot(1.0, 1.0) - 2.0);
  EXPECT_DOUBLE_EQ(r[1], -0.05 * std::hypot(0.9, 1.0) - 2.0);
  EXPECT_DOUBLE_EQ(r[2], -0.05 * std::hypot(1.0, 0.5));
  // Isolation: everyone more than 1.0 from the others.
  env.set_state(still({{-2.0, -2.0}, {2.0, -2.0}, {0.0, 2.0}}, {0.5, 0.5}));
  r = env.rewards();
  EXPECT_DOUBLE_EQ(r[0], -0.05 * std::hypot(2.5, 2.5) - 0.5);
}

TEST(Flocking, ZeroActionKeepsPosition) {
  FlockingEnv env(3);
  env.set_state(still({{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}}, {1.0, 1.0}));
  const StepResult res = env.step(std::vector<double>(6, 0.0));
  EXPECT_EQ(env.state().position[0], (Vec2{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(res.rewards[0], -0.05 * std::hypot(1.0, 1.0));
  EXPECT_FALSE(res.done);
  EXPECT_FALSE(res.info.success);
}

TEST(Flocking, DoubleIntegratorAndSpeedClamp) {
  FlockingEnv env(2);
  env.set_state(still({{0.0, 0.0}, {0.5, 0.0}}, {1.0, 1.0}));
  env.step(std::vector<double>{1.0, 0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(env.state().velocity[0][0], 0.1);
  EXPECT_DOUBLE_EQ(env.state().position[0][0], 0.01);
  for (int k = 0; k < 30; ++k) env.step(std::vector<double>{1.0, 1.0, 0.0, 0.0});
  const Vec2 v = env.state().velocity[0];
  EXPECT_LE(std::hypot(v[0], v[1]), 1.0 + 1e-12);
}

TEST(Flocking, OutOfBoundsActionsClampedAndCounted) {
  FlockingEnv env(2);
  env.set_state(still({{0.0, 0.0}, {0.5, 0.0}}, {1.0, 1.0}));
  env.step(std::vector<double>{7.0, -3.0, 0.0, std::nan("")});
  EXPECT_EQ(env.clamped_actions(), 3u);
  EXPECT_DOUBLE_EQ(env.state().velocity[0][0], 0.1);
  EXPECT_DOUBLE_EQ(env.state().velocity[0][1], -0.1);
  EXPECT_THROW(env.step(std::vector<double>{0.0}), std::invalid_argument);
}

TEST(Flocking, PositionsStayInArena) {
  FlockingEnv env(3);
  Rng rng(3);
  env.reset(rng);
  for (int k = 0; k < 100; ++k) env.step(std::vector<double>{1, 1, 1, 1, 1, 1});
  for (const Vec2& p : env.state().position) {
    EXPECT_LE(p[0], FlockingEnv::kArena);
    EXPECT_LE(p[1], FlockingEnv::kArena);
  }
}

TEST(Flocking, EpisodeInvariantsUnderRandomActions) {
  const double low = -0.05 * 4.0 * std::numbers::sqrt2 - 2.5;
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    FlockingEnv env(3);
    Rng rng(seed);
    env.reset(rng);
    bool collided = false;
    for (std::size_t t = 1; t <= FlockingEnv::kEpisodeLength; ++t) {
      std::vector<double> a(6);
      for (double& x : a) x = u(rng);
      const StepResult res = env.step(a);
      for (double r : res.rewards) {
        EXPECT_GE(r, low);
        EXPECT_LE(r, 5.0);
      }
      collided = collided || res.info.collision;
      EXPECT_EQ(res.done, t == FlockingEnv::kEpisodeLength);
      if (res.info.success) {
        EXPECT_FALSE(collided);
      }
    }
  }
}

TEST(Flocking, SuccessRequiresEveryAgentHomeWithoutCollision) {
  FlockingEnv env(2);
  auto s = still({{1.0, 1.0}, {1.3, 1.0}}, {1.15, 1.0});
  s.step = FlockingEnv::kEpisodeLength - 1;
  env.set_state(s);
  StepResult res = env.step(std::vector<double>(4, 0.0));
  EXPECT_TRUE(res.done);
  EXPECT_TRUE(res.info.success);

  s.collided = true;
  env.set_state(s);
  res = env.step(std::vector<double>(4, 0.0));
  EXPECT_FALSE(res.info.success);

  s = still({{1.0, 1.0}, {1.3, 1.9}}, {1.15, 1.0});
  s.step = FlockingEnv::kEpisodeLength - 1;
  env.set_state(s);
  EXPECT_FALSE(env.step(std::vector<double>(4, 0.0)).info.success);
}

TEST(Flocking, SameSeedAndActionsGiveSameTrajectory) {
  FlockingEnv a(3), b(3);
  Rng ra(5), rb(5), actions(6);
  a.reset(ra);
  b.reset(rb);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> act(6);
    for (double& x : act) x = u(actions);
    const StepResult x = a.step(act);
    const StepResult y = b.step(act);
    ASSERT_EQ(x.next_obs, y.next_obs);
    ASSERT_EQ(x.rewards, y.rewards);
    ASSERT_EQ(x.done, y.done);
  }
}

TEST(Flocking, CloneIsIndependent) {
  FlockingEnv env(2);
  Rng rng(8);
  env.reset(rng);
  auto copy = env.clone();
  env.step(std::vector<double>(4, 1.0));
  EXPECT_NE(env.observe(), dynamic_cast<FlockingEnv&>(*copy).observe());
}

TEST(Coordination, Rewards) {
  EXPECT_EQ(CoordinationGame::rewards(0.5, 0.5), (std::array<double, 2>{0.0, 0.0}));
  const auto r = CoordinationGame::rewards(0.0, 0.5);
  EXPECT_EQ(r[0], -0.25);
  EXPECT_EQ(r[1], 0.0);
  CoordinationGame game;
  Rng rng(1);
  EXPECT_EQ(game.reset(rng), (std::vector<double>{1.0, 1.0}));
  const StepResult res = game.step(std::vector<double>{0.5, 0.5});
  EXPECT_TRUE(res.done);
  EXPECT_TRUE(res.info.success);
  EXPECT_FALSE(game.step(std::vector<double>{0.0, 0.5}).info.success);
}

TEST(Coordination, BestResponseIsCopying) {
  for (int k = -100; k <= 100; ++k) {
    const double a2 = 0.01 * k;
    const double at = CoordinationGame::rewards(a2, a2)[0];
    EXPECT_EQ(at, 0.0);
    EXPECT_LT(CoordinationGame::rewards(a2 + 0.01, a2)[0], at);
  }
}

TEST(Coordination, ClampsActions) {
  CoordinationGame game;
  const StepResult res = game.step(std::vector<double>{3.0, 0.5});
  EXPECT_EQ(res.rewards[0], -0.25);
  EXPECT_EQ(game.clamped_actions(), 1u);
}

TEST(Environment, Factory) {
  EXPECT_EQ(make_environment("flocking", 3)->specs().size(), 3u);
  EXPECT_EQ(make_environment("coordination", 2)->name(), "coordination");
  EXPECT_THROW(make_environment("coordination", 3), std::invalid_argument);
  EXPECT_THROW(make_environment("gridworld", 2), std::invalid_argument);
}

TEST(Environment, TrajectoryRowsMatchHeader) {
  for (const char* name : {"flocking", "coordination"}) {
    auto env = make_environment(name, 2);
    Rng rng(1);
    env->reset(rng);
    const StepResult res = env->step(std::vector<double>(env->specs().size() * env->specs()[0].act_dim, 0.1));
    const std::string header = env->trajectory_header();
    const std::string row = env->trajectory_row(res);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ',')) << name;
  }
}

}  // namespace
}  // namespace mhmarl
