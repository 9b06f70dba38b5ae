#include "mhmarl/adam.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mhmarl {

AdamState AdamState::for_parameters(std::span<Parameter* const> params, double beta1, double beta2,
                                    double epsilon) {
  AdamState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  for (const Parameter* p : params) {
    state.first_moment.push_back(Tensor::zeros_like(p->value));
    state.second_moment.push_back(Tensor::zeros_like(p->value));
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " parameters but " +
                                std::to_string(grads.size()) + " gradients and " +
                                std::to_string(state.first_moment.size()) + " accumulators");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Shape& ps = params[k]->value.shape();
    if (grads[k].shape() != ps || state.first_moment[k].shape() != ps || state.second_moment[k].shape() != ps) {
      throw std::invalid_argument("adam_step: parameter '" + params[k]->name + "' has shape " + shape_string(ps) +
                                  " but gradient has shape " + shape_string(grads[k].shape()));
    }
  }

  constexpr double kTiny = std::numeric_limits<double>::min();
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  const double b1 = state.beta1, b2 = state.beta2;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.matrix().array();
    auto g = grads[k].matrix().array();
    auto m = state.first_moment[k].matrix().array();
    auto v = state.second_moment[k].matrix().array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    // A weight whose gradient stays exactly zero (dead ReLU) decays its
    // moments into subnormals, which are very slow on x86; flush them.
    m = (m.abs() < kTiny).select(0.0, m);
    v = (v < kTiny).select(0.0, v);
    w -= lr * (m / correction1) / ((v / correction2).sqrt() + state.epsilon);
  }
}

}  // namespace mhmarl
