#pragma once

#include <vector>

#include "mhmarl/losses.hpp"
#include "mhmarl/networks.hpp"

namespace mhmarl::testing {

// Q = -sum_k (a[columns_k] - target_k)^2 over chosen joint-action columns.
class QuadraticCritic final : public QFunction {
 public:
  QuadraticCritic(std::vector<AgentSpec> specs, std::size_t first_column, std::vector<double> target)
      : specs_(std::move(specs)), first_(first_column), target_(std::move(target)) {}

  const std::vector<AgentSpec>& specs() const override { return specs_; }
  Var evaluate(Graph& g, Var, Var actions, bool) const override {
    Var part = g.slice(actions, first_, first_ + target_.size());
    Var diff = g.sub(part, g.constant(Tensor::vector(target_)));
    Var sq = g.square(diff);
    // Row sums through a matmul with a column of ones.
    Var rows = g.matmul(sq, g.constant(Tensor({target_.size(), 1}, 1.0)));
    return g.scale(rows, -1.0);
  }

 private:
  std::vector<AgentSpec> specs_;
  std::size_t first_;
  std::vector<double> target_;
};

inline std::vector<AgentSpec> three_agents() {
  return {AgentSpec::box(3, 2, -1.0, 1.0), AgentSpec::box(2, 1, -1.0, 1.0), AgentSpec::box(4, 2, -1.0, 1.0)};
}

inline double max_abs(const std::vector<Tensor>& grads) {
  double m = 0.0;
  for (const auto& t : grads) {
    for (double v : t.data()) m = std::max(m, std::fabs(v));
  }
  return m;
}

}  // namespace mhmarl::testing
