#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mhmarl/losses.hpp"
#include "mhmarl/replay_buffer.hpp"

namespace mhmarl {

enum class Backend { maddpg, matd3 };
enum class RewardScheme { local, global_sum };

std::string_view to_string(Backend backend);
std::string_view to_string(RewardScheme scheme);

// Everything that determines one training run apart from the seed.
struct TrainConfig {
  Backend backend = Backend::maddpg;
  bool mutual_help = true;
  bool selectivity = true;
  bool marl_term = true;
  RewardScheme reward_scheme = RewardScheme::local;
  HyperParams hp;
  double noise_sigma_start = 0.1;
  double noise_sigma_end = 0.01;
  std::size_t warmup = 1000;
  std::size_t total_steps = 100'000;
  std::size_t eval_every = 5'000;
  std::size_t eval_episodes = 10;
  std::vector<std::uint64_t> seeds{0};
  std::string env = "flocking";
  std::size_t n_agents = 3;
  std::size_t buffer_capacity = ReplayBuffer::kDefaultCapacity;
  // Twin-critic backend only.
  std::size_t policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  // Label used in metrics and output paths; derived from the switches when empty.
  std::string algorithm;

  // Throws std::invalid_argument on out-of-range values or illegal ablation
  // combinations.
  void validate() const;
  std::string algorithm_name() const;
};

// Named presets: maddpg, mh-maddpg, maddpg-gr, no-help, no-selectivity,
// no-marl, matd3, mh-matd3, matd3-gr. Other fields keep their defaults.
TrainConfig preset(std::string_view algorithm);
std::vector<std::string> preset_names();

// Flat "key = value" text, one field per line, '#' starts a comment. Keys are
// the TrainConfig field names (hyperparameters use their own names: gamma,
// tau, eta, beta, batch_size, lr_actor, lr_critic, lr_expected). `seeds` is a
// comma-separated list. Unknown keys are errors.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
std::string format_config(const TrainConfig& config);
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

}  // namespace mhmarl
