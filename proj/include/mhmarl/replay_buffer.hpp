#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mhmarl/losses.hpp"
#include "mhmarl/networks.hpp"

namespace mhmarl {

struct Transition {
  std::vector<double> obs;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<double> next_obs;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Fixed-capacity ring of joint transitions; the oldest record is overwritten
// once full. Sampling is uniform with replacement.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 50'000;

  ReplayBuffer(std::vector<AgentSpec> specs, std::size_t capacity = kDefaultCapacity);

  // Throws std::invalid_argument on dimension mismatch or non-finite rewards.
  void push(const Transition& t);
  // Throws std::invalid_argument when the buffer is empty or m == 0.
  Minibatch sample(std::size_t m, Rng& rng) const;
  // Index 0 is the oldest record still stored.
  Transition at(std::size_t index) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }

 private:
  void copy_row(std::size_t slot, std::size_t row, Minibatch& out) const;

  std::vector<AgentSpec> specs_;
  std::size_t capacity_;
  std::size_t obs_dim_;
  std::size_t act_dim_;
  std::size_t n_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::size_t pushed_ = 0;
  std::vector<double> obs_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_obs_;
  std::vector<double> done_;
};

}  // namespace mhmarl
