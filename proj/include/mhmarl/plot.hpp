#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mhmarl/metrics.hpp"

namespace mhmarl {

enum class AxisScale { linear, fifth_root, symlog };

AxisScale parse_axis_scale(std::string_view name);
double apply_scale(AxisScale scale, double y);
double invert_scale(AxisScale scale, double t);

// Seed-aggregated curve of one algorithm: at each checkpoint the mean over
// seeds and the band spanned by the per-seed minimum and maximum.
struct CurveBand {
  std::string algorithm;
  std::vector<std::uint64_t> steps;
  std::vector<double> mean;
  std::vector<double> low;
  std::vector<double> high;
  std::vector<std::size_t> seeds;  // contributing seeds per checkpoint
};

// Metrics: success_rate, mean_return, critic_loss, actor_loss, help_loss,
// expected_loss, alpha, gate_rate. Rows lacking an optional metric are
// skipped. Output is sorted by algorithm name, steps ascending.
std::vector<CurveBand> aggregate_curves(std::span<const MetricsRow> rows, std::string_view metric);

// Static SVG line chart. Pure function of its inputs.
std::string render_svg(std::span<const CurveBand> curves, std::string_view metric, AxisScale scale);

}  // namespace mhmarl
