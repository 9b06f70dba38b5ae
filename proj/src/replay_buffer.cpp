#include "mhmarl/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mhmarl {

ReplayBuffer::ReplayBuffer(std::vector<AgentSpec> specs, std::size_t capacity)
    : specs_(std::move(specs)),
      capacity_(capacity),
      obs_dim_(joint_obs_dim(specs_)),
      act_dim_(joint_act_dim(specs_)),
      n_(specs_.size()) {
  if (capacity_ == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  if (n_ == 0) throw std::invalid_argument("replay buffer needs at least one agent");
  obs_.resize(capacity_ * obs_dim_);
  actions_.resize(capacity_ * act_dim_);
  rewards_.resize(capacity_ * n_);
  next_obs_.resize(capacity_ * obs_dim_);
  done_.resize(capacity_);
}

void ReplayBuffer::push(const Transition& t) {
  auto check = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
      throw std::invalid_argument(std::string("transition ") + what + " has length " + std::to_string(got) +
                                  ", expected " + std::to_string(want));
    }
  };
  check(t.obs.size(), obs_dim_, "obs");
  check(t.actions.size(), act_dim_, "actions");
  check(t.rewards.size(), n_, "rewards");
  check(t.next_obs.size(), obs_dim_, "next_obs");
  for (double r : t.rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("transition reward is not finite");
  }

  const std::size_t slot = next_;
  std::copy(t.obs.begin(), t.obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(slot * obs_dim_));
  std::copy(t.actions.begin(), t.actions.end(), actions_.begin() + static_cast<std::ptrdiff_t>(slot * act_dim_));
  std::copy(t.rewards.begin(), t.rewards.end(), rewards_.begin() + static_cast<std::ptrdiff_t>(slot * n_));
  std::copy(t.next_obs.begin(), t.next_obs.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(slot * obs_dim_));
  done_[slot] = t.done ? 1.0 : 0.0;

  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++pushed_;
}

void ReplayBuffer::copy_row(std::size_t slot, std::size_t row, Minibatch& out) const {
  auto copy = [&](const std::vector<double>& src, std::size_t width, Tensor& dst) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(slot * width), width,
                dst.data().begin() + static_cast<std::ptrdiff_t>(row * width));
  };
  copy(obs_, obs_dim_, out.obs);
  copy(actions_, act_dim_, out.actions);
  copy(rewards_, n_, out.rewards);
  copy(next_obs_, obs_dim_, out.next_obs);
  out.done[row] = done_[slot];
}

Minibatch ReplayBuffer::sample(std::size_t m, Rng& rng) const {
  if (m == 0) throw std::invalid_argument("minibatch size must be positive");
  // With replacement, so any non-empty buffer can fill a minibatch of any size.
  if (size_ == 0) throw std::invalid_argument("cannot sample from an empty replay buffer");
  Minibatch out{Tensor({m, obs_dim_}), Tensor({m, act_dim_}), Tensor({m, n_}), Tensor({m, obs_dim_}),
                Tensor({m, 1})};
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (std::size_t row = 0; row < m; ++row) copy_row(pick(rng), row, out);
  return out;
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay buffer index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  const std::size_t slot = (oldest + index) % capacity_;
  auto row = [&](const std::vector<double>& src, std::size_t width) {
    auto begin = src.begin() + static_cast<std::ptrdiff_t>(slot * width);
    return std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(width));
  };
  return Transition{row(obs_, obs_dim_), row(actions_, act_dim_), row(rewards_, n_), row(next_obs_, obs_dim_),
                    done_[slot] != 0.0};
}

}  // namespace mhmarl
