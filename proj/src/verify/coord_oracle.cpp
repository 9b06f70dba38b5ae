#include "mhmarl/verify/coord_oracle.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "mhmarl/envs.hpp"

namespace mhmarl::verify {

bool CoordOracleResult::passed() const {
  return both_maximized && unique && best_response_ok && std::fabs(best_a1 - CoordinationGame::kTarget) < 1e-12 &&
         std::fabs(best_a2 - CoordinationGame::kTarget) < 1e-12;
}

CoordOracleResult run_coordination_oracle(double resolution) {
  const auto steps = static_cast<std::size_t>(std::llround(2.0 / resolution));
  std::vector<double> axis(steps + 1);
  // Integer-indexed so that 0.5 lands on the grid exactly.
  for (std::size_t k = 0; k <= steps; ++k) axis[k] = -1.0 + static_cast<double>(k) * 2.0 / static_cast<double>(steps);

  CoordOracleResult r;
  r.grid = axis.size();
  double max_r1 = -std::numeric_limits<double>::infinity(), max_r2 = max_r1, max_total = max_r1;
  for (double a1 : axis) {
    for (double a2 : axis) {
      const auto [r1, r2] = CoordinationGame::rewards(a1, a2);
      max_r1 = std::max(max_r1, r1);
      max_r2 = std::max(max_r2, r2);
      if (r1 + r2 > max_total) {
        max_total = r1 + r2;
        r.best_a1 = a1;
        r.best_a2 = a2;
      }
    }
  }
  r.best_total = max_total;
  const auto [b1, b2] = CoordinationGame::rewards(r.best_a1, r.best_a2);
  r.both_maximized = b1 == max_r1 && b2 == max_r2;

  std::size_t attaining_both = 0;
  for (double a1 : axis) {
    for (double a2 : axis) {
      const auto [r1, r2] = CoordinationGame::rewards(a1, a2);
      attaining_both += r1 == max_r1 && r2 == max_r2;
    }
  }
  r.unique = attaining_both == 1;

  r.best_response_ok = true;
  for (std::size_t j = 0; j < axis.size(); ++j) {
    std::size_t arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < axis.size(); ++k) {
      const double r1 = CoordinationGame::rewards(axis[k], axis[j])[0];
      if (r1 > best) {
        best = r1;
        arg = k;
      }
    }
    r.best_response_ok = r.best_response_ok && arg == j;
  }
  return r;
}

std::string format_result(const CoordOracleResult& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%s coordination grid %zux%zu: argmax total (%.2f, %.2f) total=%.3g maximizes both=%s unique=%s "
                "best response a1=a2=%s\n",
                r.passed() ? "ok  " : "FAIL", r.grid, r.grid, r.best_a1, r.best_a2, r.best_total + 0.0,
                r.both_maximized ? "yes" : "no", r.unique ? "yes" : "no", r.best_response_ok ? "yes" : "no");
  return buf;
}

}  // namespace mhmarl::verify
