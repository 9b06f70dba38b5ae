#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mhmarl/networks.hpp"

namespace mhmarl {

struct StepInfo {
  bool success = false;
  bool collision = false;
  bool isolation = false;
};

struct StepResult {
  std::vector<double> next_obs;  // joint observation
  std::vector<double> rewards;   // one local reward per agent
  bool done = false;
  StepInfo info;
};

// A Markov game with local rewards. Observations and actions are exchanged as
// flat joint vectors laid out in agent-index order.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual const std::vector<AgentSpec>& specs() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(std::span<const double> joint_action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  // Trajectory dump: one CSV row per step after the header.
  virtual std::string trajectory_header() const = 0;
  virtual std::string trajectory_row(const StepResult& result) const = 0;

  // Number of action components clamped to their bounds so far.
  std::size_t clamped_actions() const { return clamped_; }

 protected:
  double clamp_action(double value, double low, double high);

 private:
  std::size_t clamped_ = 0;
};

// Known names: "flocking", "coordination".
std::unique_ptr<Environment> make_environment(std::string_view name, std::size_t n_agents);

using Vec2 = std::array<double, 2>;

// Surrogate flocking navigation: double-integrator point agents must reach a
// goal disc together, keeping neighbours closer than d_max and farther than
// d_min.
class FlockingEnv final : public Environment {
 public:
  static constexpr double kArena = 2.0;
  static constexpr double kDt = 0.1;
  static constexpr double kMaxAccel = 1.0;
  static constexpr double kMaxSpeed = 1.0;
  static constexpr double kMinDistance = 0.2;
  static constexpr double kMaxDistance = 1.0;
  static constexpr double kGoalRadius = 0.5;
  static constexpr std::size_t kEpisodeLength = 100;
  static constexpr Vec2 kSpawnCenter{-1.5, -1.5};
  static constexpr double kSpawnRadius = 0.5;
  static constexpr double kGoalLow = 0.5;
  static constexpr double kGoalHigh = 1.5;
  static constexpr std::size_t kSpawnTries = 1000;

  static constexpr double kDistanceWeight = 0.05;
  static constexpr double kCollisionPenalty = 2.0;
  static constexpr double kIsolationPenalty = 0.5;
  static constexpr double kGoalBonus = 5.0;

  struct State {
    std::vector<Vec2> position;
    std::vector<Vec2> velocity;
    Vec2 goal{};
    std::size_t step = 0;
    bool collided = false;
  };

  explicit FlockingEnv(std::size_t n_agents);

  std::string_view name() const override { return "flocking"; }
  const std::vector<AgentSpec>& specs() const override { return specs_; }
  // Throws std::runtime_error if the spawn disc cannot fit the agents.
  std::vector<double> reset(Rng& rng) override;
  StepResult step(std::span<const double> joint_action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<FlockingEnv>(*this); }
  std::string trajectory_header() const override;
  std::string trajectory_row(const StepResult& result) const override;

  std::size_t agents() const { return n_; }
  static std::size_t obs_dim(std::size_t n_agents) { return 6 + 4 * (n_agents - 1); }

  const State& state() const { return state_; }
  void set_state(State state);
  std::vector<double> observe() const;
  // Local rewards for the current state.
  std::vector<double> rewards() const;
  double nearest_neighbour(std::size_t i) const;

 private:
  std::size_t n_;
  std::vector<AgentSpec> specs_;
  State state_;
};

// One-step, two-agent game: r1 = -(a1 - a2)^2, r2 = -(a2 - 0.5)^2. Agent 2's
// reward is self-contained while agent 1 depends on agent 2.
class CoordinationGame final : public Environment {
 public:
  static constexpr double kTarget = 0.5;
  static constexpr double kSuccessThreshold = -0.02;

  CoordinationGame();

  std::string_view name() const override { return "coordination"; }
  const std::vector<AgentSpec>& specs() const override { return specs_; }
  std::vector<double> reset(Rng& rng) override;
  StepResult step(std::span<const double> joint_action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CoordinationGame>(*this); }
  std::string trajectory_header() const override;
  std::string trajectory_row(const StepResult& result) const override;

  static std::array<double, 2> rewards(double a1, double a2);

 private:
  std::vector<AgentSpec> specs_;
  std::array<double, 2> last_action_{};
};

}  // namespace mhmarl
