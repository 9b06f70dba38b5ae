#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mhmarl/losses.hpp"
#include "mhmarl/networks.hpp"

// Hand-written forward math for every network and loss, using plain loops
// over parameter values and no graph. Used as an independent oracle for the
// graph-built losses.
namespace mhmarl::verify::plain {

using Vec = std::vector<double>;
using Policy = std::function<Vec(std::span<const double>)>;
using Critic = std::function<double(std::span<const double> obs, std::span<const double> actions)>;

Vec mlp(const Mlp& net, std::span<const double> input);
Vec actor(const ActorNet& net, std::span<const double> obs);
double critic(const CriticNet& net, std::span<const double> obs, std::span<const double> actions);
Vec expected(const ExpectedNet& net, std::span<const double> joint_obs);

Policy policy_of(const ActorNet& net);
Policy policy_of(const ExpectedNet& net);
Critic critic_of(const CriticNet& net);

struct Teacher {
  std::size_t owner;
  Policy policy;  // full expected-policy output of `owner`
};

Vec td_target(const Minibatch& batch, std::span<const AgentSpec> specs, std::size_t agent,
              std::span<const Critic> target_critics, std::span<const Policy> target_actors, double gamma);
double critic_loss(const Critic& q, const Minibatch& batch, std::span<const double> y);
double actor_loss(const Critic& q, const Policy& pi, const Minibatch& batch, std::span<const AgentSpec> specs,
                  std::size_t agent);
double expected_loss(const Critic& q, const Policy& pi, const Teacher& mu, const Minibatch& batch,
                     std::span<const AgentSpec> specs);
double help_loss(const Critic& q, const Policy& pi, std::span<const Teacher> teachers, const Minibatch& batch,
                 std::span<const AgentSpec> specs, std::size_t agent, double eta, bool selective);
double mix_ratio(const Critic& q, const Policy& pi, const Minibatch& batch, std::span<const AgentSpec> specs,
                 std::size_t agent, double beta);
double mh_actor_loss(double actor_term, double help_term, double alpha, bool include_actor_term);

}  // namespace mhmarl::verify::plain

namespace mhmarl::verify {

struct OracleCase {
  std::string name;
  std::size_t compared = 0;
  double max_abs_diff = 0.0;
  bool passed = true;
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCase> cases;
  bool passed() const;
};

inline constexpr double kOracleTolerance = 1e-10;

// Graph-computed losses against the straight-line versions on `draws` random
// problems (random agent count, dims, bounds, batch size and networks), plus
// the hand-worked examples checked against their stated values.
OracleReport run_loss_oracle(std::size_t draws = 100, std::uint64_t seed = 1);

std::string format_report(const OracleReport& report);

}  // namespace mhmarl::verify
