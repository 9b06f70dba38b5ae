#pragma once

#include <cstddef>
#include <string>

namespace mhmarl::verify {

// Brute force over the coordination game's action grid.
struct CoordOracleResult {
  std::size_t grid = 0;          // points per axis
  double best_a1 = 0.0;          // maximizer of the total reward
  double best_a2 = 0.0;
  double best_total = 0.0;
  bool both_maximized = false;   // the total maximizer also maximizes r1 and r2
  bool unique = false;           // no other grid point attains both maxima
  bool best_response_ok = false; // argmax_a1 r1(a1, a2) == a2 for every grid a2
  bool passed() const;
};

// resolution 0.01 over [-1, 1] gives the 201 x 201 grid.
CoordOracleResult run_coordination_oracle(double resolution = 0.01);

std::string format_result(const CoordOracleResult& r);

}  // namespace mhmarl::verify
