#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mhmarl/config.hpp"
#include "mhmarl/tensor.hpp"

namespace mhmarl::reference {

// Plain MADDPG written directly against networks, graph, Adam and the replay
// buffer, with none of the training harness. Parameters are reported after
// every environment step in the harness snapshot order (per agent: actor,
// target actor, critic, target critic). Only the maddpg backend with local
// rewards is supported.
using StepObserver = std::function<void(std::size_t step, const std::vector<const Parameter*>& params)>;

void run_maddpg(const TrainConfig& config, std::uint64_t seed, const StepObserver& observe);

}  // namespace mhmarl::reference
