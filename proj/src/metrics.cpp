#include "mhmarl/metrics.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "mhmarl/io_util.hpp"

namespace mhmarl {

void validate_row(const MetricsRow& row) {
  if (row.algorithm.empty() || row.algorithm.find_first_of(",\n\r\"") != std::string::npos) {
    throw std::invalid_argument("metrics row: algorithm name '" + row.algorithm + "' is empty or not CSV-safe");
  }
  if (!(row.success_rate >= 0.0 && row.success_rate <= 1.0)) {
    throw std::invalid_argument("metrics row: success_rate outside [0, 1]");
  }
  if (!std::isfinite(row.mean_return)) throw std::invalid_argument("metrics row: mean_return is not finite");
  for (const auto& d : {row.critic_loss, row.actor_loss, row.help_loss, row.expected_loss, row.alpha, row.gate_rate}) {
    if (d && !std::isfinite(*d)) throw std::invalid_argument("metrics row: non-finite loss diagnostic");
  }
  if (row.gate_rate && !(*row.gate_rate >= 0.0 && *row.gate_rate <= 1.0)) {
    throw std::invalid_argument("metrics row: gate_rate outside [0, 1]");
  }
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line = line.substr(comma + 1);
  }
  return out;
}

std::uint64_t parse_u64(std::string_view v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("not a non-negative integer: '" + std::string(v) + "'");
  }
  return out;
}

std::optional<double> parse_opt(std::string_view v) {
  if (v.empty()) return std::nullopt;
  return parse_double(v);
}

}  // namespace

std::string format_metrics(std::span<const MetricsRow> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.step) + ',' + std::to_string(r.seed) + ',' + r.algorithm + ',' +
           format_double(r.success_rate) + ',' + format_double(r.mean_return) + ',' + opt(r.critic_loss) + ',' +
           opt(r.actor_loss) + ',' + opt(r.help_loss) + ',' + opt(r.expected_loss) + ',' + opt(r.alpha) + ',' +
           opt(r.gate_rate) + '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics(std::string_view text) {
  std::vector<MetricsRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kMetricsHeader) {
        throw std::runtime_error("metrics header mismatch:\n  expected: " + std::string(kMetricsHeader) +
                                 "\n  found:    " + std::string(line));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 11) {
      throw std::runtime_error("metrics line " + std::to_string(line_no) + ": expected 11 fields, found " +
                               std::to_string(f.size()));
    }
    try {
      MetricsRow r;
      r.step = parse_u64(f[0]);
      r.seed = parse_u64(f[1]);
      r.algorithm = std::string(f[2]);
      r.success_rate = parse_double(f[3]);
      r.mean_return = parse_double(f[4]);
      r.critic_loss = parse_opt(f[5]);
      r.actor_loss = parse_opt(f[6]);
      r.help_loss = parse_opt(f[7]);
      r.expected_loss = parse_opt(f[8]);
      r.alpha = parse_opt(f[9]);
      r.gate_rate = parse_opt(f[10]);
      validate_row(r);
      rows.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("metrics line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw std::runtime_error("metrics file is empty (no header)");
  return rows;
}

void write_metrics(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  for (const MetricsRow& r : rows) validate_row(r);
  write_file_atomically(path, format_metrics(rows));
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  try {
    return parse_metrics(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace mhmarl
