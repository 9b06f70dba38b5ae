#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mhmarl/tensor.hpp"

namespace mhmarl {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  // Zero accumulators shaped like `params`.
  static AdamState for_parameters(std::span<Parameter* const> params, double beta1 = 0.9, double beta2 = 0.999,
                                  double epsilon = 1e-8);
};

// One bias-corrected Adam update, descending along `grads`. Throws
// std::invalid_argument on any shape disagreement between params, grads and
// the accumulators, or if lr is not positive.
void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state, double lr);

}  // namespace mhmarl
