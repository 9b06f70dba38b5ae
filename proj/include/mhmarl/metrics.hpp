#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mhmarl {

// One evaluation checkpoint of one (algorithm, seed) run. Loss diagnostics are
// averages over agents and over the updates since the previous checkpoint;
// they are empty when no update happened or the term does not exist for the
// algorithm (no help loss without mutual help, for example).
struct MetricsRow {
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  double success_rate = 0.0;
  double mean_return = 0.0;
  std::optional<double> critic_loss;
  std::optional<double> actor_loss;
  std::optional<double> help_loss;
  std::optional<double> expected_loss;
  std::optional<double> alpha;
  std::optional<double> gate_rate;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::string_view kMetricsHeader =
    "step,seed,algorithm,success_rate,mean_return,critic_loss,actor_loss,help_loss,expected_loss,alpha,gate_rate";

// Throws std::invalid_argument describing the first violation.
void validate_row(const MetricsRow& row);

std::string format_metrics(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics(std::string_view text);

// Validates every row before anything is written; the file appears
// atomically.
void write_metrics(std::span<const MetricsRow> rows, const std::filesystem::path& path);
// Throws std::runtime_error naming the file and line on malformed input.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace mhmarl
