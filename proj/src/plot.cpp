#include "mhmarl/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>

namespace mhmarl {

AxisScale parse_axis_scale(std::string_view name) {
  if (name == "linear") return AxisScale::linear;
  if (name == "fifth-root") return AxisScale::fifth_root;
  if (name == "symlog") return AxisScale::symlog;
  throw std::invalid_argument("unknown axis scale '" + std::string(name) + "' (linear, fifth-root, symlog)");
}

double apply_scale(AxisScale scale, double y) {
  switch (scale) {
    case AxisScale::linear: return y;
    case AxisScale::fifth_root: return std::copysign(std::pow(std::fabs(y), 0.2), y);
    case AxisScale::symlog: return std::copysign(std::log10(1.0 + std::fabs(y)), y);
  }
  return y;
}

double invert_scale(AxisScale scale, double t) {
  switch (scale) {
    case AxisScale::linear: return t;
    case AxisScale::fifth_root: return std::copysign(std::pow(std::fabs(t), 5.0), t);
    case AxisScale::symlog: return std::copysign(std::pow(10.0, std::fabs(t)) - 1.0, t);
  }
  return t;
}

namespace {

std::optional<double> metric_value(const MetricsRow& r, std::string_view metric) {
  if (metric == "success_rate") return r.success_rate;
  if (metric == "mean_return") return r.mean_return;
  if (metric == "critic_loss") return r.critic_loss;
  if (metric == "actor_loss") return r.actor_loss;
  if (metric == "help_loss") return r.help_loss;
  if (metric == "expected_loss") return r.expected_loss;
  if (metric == "alpha") return r.alpha;
  if (metric == "gate_rate") return r.gate_rate;
  throw std::invalid_argument("unknown metric '" + std::string(metric) + "'");
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr std::array<const char*, 8> kPalette = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::vector<CurveBand> aggregate_curves(std::span<const MetricsRow> rows, std::string_view metric) {
  std::map<std::string, std::map<std::uint64_t, std::vector<double>>> grouped;
  for (const MetricsRow& r : rows) {
    if (auto v = metric_value(r, metric)) grouped[r.algorithm][r.step].push_back(*v);
  }
  std::vector<CurveBand> out;
  for (auto& [algorithm, by_step] : grouped) {
    CurveBand band;
    band.algorithm = algorithm;
    for (auto& [step, values] : by_step) {
      double sum = 0.0;
      for (double v : values) sum += v;
      band.steps.push_back(step);
      band.mean.push_back(sum / static_cast<double>(values.size()));
      band.low.push_back(*std::min_element(values.begin(), values.end()));
      band.high.push_back(*std::max_element(values.begin(), values.end()));
      band.seeds.push_back(values.size());
    }
    out.push_back(std::move(band));
  }
  return out;
}

std::string render_svg(std::span<const CurveBand> curves, std::string_view metric, AxisScale scale) {
  constexpr double width = 720, height = 440, left = 70, right = 170, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.steps.size(); ++k) {
      x_min = std::min(x_min, static_cast<double>(c.steps[k]));
      x_max = std::max(x_max, static_cast<double>(c.steps[k]));
      y_min = std::min(y_min, apply_scale(scale, c.low[k]));
      y_max = std::max(y_max, apply_scale(scale, c.high[k]));
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0;
    x_max = 1;
    y_min = 0;
    y_max = 1;
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double t) { return top + (1.0 - (t - y_min) / (y_max - y_min)) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
         num(plot_h) + "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double t = y_min + (y_max - y_min) * k / 4.0;
    const double y = py(t);
    svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + plot_w) + "\" y2=\"" + num(y) +
           "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
           label(invert_scale(scale, t)) + "</text>\n";
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(top + plot_h + 16) + "\" text-anchor=\"middle\">" +
           label(xv) + "</text>\n";
  }
  const char* scale_name = scale == AxisScale::linear ? "" : scale == AxisScale::fifth_root ? " (fifth root)" : " (symlog)";
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 12) +
         "\" text-anchor=\"middle\">training step</text>\n";
  svg += "<text x=\"16\" y=\"" + num(top + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(top + plot_h / 2) + ")\">" + xml_escape(metric) + scale_name + "</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& band = curves[c];
    const char* color = kPalette[c % kPalette.size()];
    std::string area, line;
    for (std::size_t k = 0; k < band.steps.size(); ++k) {
      area += (k ? " " : "") + num(px(static_cast<double>(band.steps[k]))) + "," + num(py(apply_scale(scale, band.high[k])));
    }
    for (std::size_t k = band.steps.size(); k-- > 0;) {
      area += " " + num(px(static_cast<double>(band.steps[k]))) + "," + num(py(apply_scale(scale, band.low[k])));
    }
    for (std::size_t k = 0; k < band.steps.size(); ++k) {
      line += (k ? " " : "") + num(px(static_cast<double>(band.steps[k]))) + "," + num(py(apply_scale(scale, band.mean[k])));
    }
    svg += "<polygon points=\"" + area + "\" fill=\"" + color + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.8\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(c);
    svg += "<line x1=\"" + num(left + plot_w + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + plot_w + 32) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(left + plot_w + 38) + "\" y=\"" + num(ly) + "\">" + xml_escape(band.algorithm) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace mhmarl
