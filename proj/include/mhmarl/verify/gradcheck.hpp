#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mhmarl/autodiff.hpp"

namespace mhmarl::verify {

struct GradCheckOptions {
  std::size_t draws = 10;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so entries whose true gradient
  // is ~0 are judged on absolute error instead.
  double floor = 1e-6;
  std::size_t batch = 3;
  std::uint64_t seed = 1;
  PlantedFault fault = PlantedFault::none;
};

struct GradCheckCase {
  std::string name;
  std::size_t draws = 0;
  std::size_t checked = 0;
  // Coordinates whose +-step perturbation crossed a ReLU kink or flipped a
  // gate; finite differences are meaningless there.
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  // Set for contract checks (quantities that must carry exactly no gradient).
  bool exact = false;
  double limit = 0.0;  // allowed error of an exact check
  bool passed = true;
  std::string detail;
  std::string note;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double seconds = 0.0;
  bool passed() const;
};

// Builds a scalar loss into `g`. Anything discontinuous that the ReLU pattern
// does not capture (gates) goes into `signature`.
using LossBuilder = std::function<Var(Graph& g, std::vector<bool>& signature)>;

// Central differences on every entry of `params` against the backward pass of
// a graph built with `fault`. Accumulates into `out`.
void check_gradient(GradCheckCase& out, std::span<Parameter* const> params, const LossBuilder& build,
                    const GradCheckOptions& options);

// Every network architecture and every loss, over options.draws random
// instantiations each.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

std::string format_report(const GradCheckReport& report);

}  // namespace mhmarl::verify
