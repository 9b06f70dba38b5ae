#include "mhmarl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mhmarl/io_util.hpp"

namespace mhmarl {

namespace {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

void check_action_length(std::span<const double> joint_action, std::size_t want) {
  if (joint_action.size() != want) {
    throw std::invalid_argument("joint action has length " + std::to_string(joint_action.size()) + ", expected " +
                                std::to_string(want));
  }
}

}  // namespace

double Environment::clamp_action(double value, double low, double high) {
  if (std::isnan(value)) {
    ++clamped_;
    return 0.5 * (low + high);
  }
  if (value < low || value > high) {
    ++clamped_;
    return std::clamp(value, low, high);
  }
  return value;
}

std::unique_ptr<Environment> make_environment(std::string_view name, std::size_t n_agents) {
  if (name == "flocking") return std::make_unique<FlockingEnv>(n_agents);
  if (name == "coordination") {
    if (n_agents != 2) throw std::invalid_argument("the coordination game has exactly 2 agents");
    return std::make_unique<CoordinationGame>();
  }
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

// --- flocking -------------------------------------------------------------

FlockingEnv::FlockingEnv(std::size_t n_agents) : n_(n_agents) {
  if (n_ < 2) throw std::invalid_argument("flocking needs at least 2 agents");
  specs_.assign(n_, AgentSpec::box(obs_dim(n_), 2, -1.0, 1.0));
  state_.position.assign(n_, Vec2{});
  state_.velocity.assign(n_, Vec2{});
}

std::vector<double> FlockingEnv::reset(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State s;
  s.position.reserve(n_);
  s.velocity.assign(n_, Vec2{0.0, 0.0});
  for (std::size_t i = 0; i < n_; ++i) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kSpawnTries && !placed; ++attempt) {
      const double r = kSpawnRadius * std::sqrt(unit(rng));
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      const Vec2 p{kSpawnCenter[0] + r * std::cos(theta), kSpawnCenter[1] + r * std::sin(theta)};
      placed = std::all_of(s.position.begin(), s.position.end(),
                           [&](const Vec2& q) { return distance(p, q) >= kMinDistance; });
      if (placed) s.position.push_back(p);
    }
    if (!placed) {
      throw std::runtime_error("flocking reset: cannot place " + std::to_string(n_) +
                               " agents in the spawn disc with the minimum spacing");
    }
  }
  std::uniform_real_distribution<double> goal(kGoalLow, kGoalHigh);
  s.goal[0] = goal(rng);
  s.goal[1] = goal(rng);
  state_ = std::move(s);
  return observe();
}

void FlockingEnv::set_state(State state) {
  if (state.position.size() != n_ || state.velocity.size() != n_) {
    throw std::invalid_argument("flocking state has the wrong number of agents");
  }
  state_ = std::move(state);
}

std::vector<double> FlockingEnv::observe() const {
  std::vector<double> obs;
  obs.reserve(n_ * obs_dim(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const Vec2& p = state_.position[i];
    const Vec2& v = state_.velocity[i];
    obs.insert(obs.end(), {p[0], p[1], v[0], v[1], state_.goal[0] - p[0], state_.goal[1] - p[1]});
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const Vec2& q = state_.position[j];
      const Vec2& w = state_.velocity[j];
      obs.insert(obs.end(), {q[0] - p[0], q[1] - p[1], w[0] - v[0], w[1] - v[1]});
    }
  }
  return obs;
}

double FlockingEnv::nearest_neighbour(std::size_t i) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n_; ++j) {
    if (j != i) best = std::min(best, distance(state_.position[i], state_.position[j]));
  }
  return best;
}

std::vector<double> FlockingEnv::rewards() const {
  std::vector<double> r(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double to_goal = distance(state_.position[i], state_.goal);
    const double nearest = nearest_neighbour(i);
    r[i] = -kDistanceWeight * to_goal;
    if (nearest < kMinDistance) r[i] -= kCollisionPenalty;
    if (nearest > kMaxDistance) r[i] -= kIsolationPenalty;
    if (to_goal < kGoalRadius) r[i] += kGoalBonus;
  }
  return r;
}

StepResult FlockingEnv::step(std::span<const double> joint_action) {
  check_action_length(joint_action, 2 * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    Vec2& v = state_.velocity[i];
    Vec2& p = state_.position[i];
    for (std::size_t k = 0; k < 2; ++k) {
      const double a = clamp_action(joint_action[2 * i + k], -1.0, 1.0);
      v[k] += a * kMaxAccel * kDt;
    }
    const double speed = std::hypot(v[0], v[1]);
    if (speed > kMaxSpeed) {
      v[0] *= kMaxSpeed / speed;
      v[1] *= kMaxSpeed / speed;
    }
    for (std::size_t k = 0; k < 2; ++k) p[k] = std::clamp(p[k] + v[k] * kDt, -kArena, kArena);
  }
  ++state_.step;

  StepResult out;
  out.rewards = rewards();
  for (std::size_t i = 0; i < n_; ++i) {
    const double nearest = nearest_neighbour(i);
    out.info.collision = out.info.collision || nearest < kMinDistance;
    out.info.isolation = out.info.isolation || nearest > kMaxDistance;
  }
  state_.collided = state_.collided || out.info.collision;
  out.done = state_.step >= kEpisodeLength;
  if (out.done) {
    const bool all_home = std::all_of(state_.position.begin(), state_.position.end(), [&](const Vec2& p) {
      return distance(p, state_.goal) < kGoalRadius;
    });
    out.info.success = all_home && !state_.collided;
  }
  out.next_obs = observe();
  return out;
}

std::string FlockingEnv::trajectory_header() const {
  std::string h = "step";
  for (std::size_t i = 0; i < n_; ++i) {
    const std::string k = std::to_string(i);
    h += ",x" + k + ",y" + k + ",vx" + k + ",vy" + k;
  }
  for (std::size_t i = 0; i < n_; ++i) h += ",r" + std::to_string(i);
  return h;
}

std::string FlockingEnv::trajectory_row(const StepResult& result) const {
  std::string row = std::to_string(state_.step);
  for (std::size_t i = 0; i < n_; ++i) {
    for (double x : {state_.position[i][0], state_.position[i][1], state_.velocity[i][0], state_.velocity[i][1]}) {
      row += "," + format_double(x);
    }
  }
  for (double r : result.rewards) row += "," + format_double(r);
  return row;
}

// --- coordination game ------------------------------------------------------

CoordinationGame::CoordinationGame() : specs_(2, AgentSpec::box(1, 1, -1.0, 1.0)) {}

std::vector<double> CoordinationGame::reset(Rng&) { return {1.0, 1.0}; }

std::array<double, 2> CoordinationGame::rewards(double a1, double a2) {
  return {-(a1 - a2) * (a1 - a2), -(a2 - kTarget) * (a2 - kTarget)};
}

StepResult CoordinationGame::step(std::span<const double> joint_action) {
  check_action_length(joint_action, 2);
  const double a1 = clamp_action(joint_action[0], -1.0, 1.0);
  const double a2 = clamp_action(joint_action[1], -1.0, 1.0);
  last_action_ = {a1, a2};
  const auto r = rewards(a1, a2);
  StepResult out;
  out.next_obs = {1.0, 1.0};
  out.rewards = {r[0], r[1]};
  out.done = true;
  out.info.success = r[0] + r[1] > kSuccessThreshold;
  return out;
}

std::string CoordinationGame::trajectory_header() const { return "step,a0,a1,r0,r1"; }

std::string CoordinationGame::trajectory_row(const StepResult& result) const {
  return "1," + format_double(last_action_[0]) + "," + format_double(last_action_[1]) + "," +
         format_double(result.rewards[0]) + "," + format_double(result.rewards[1]);
}

}  // namespace mhmarl
