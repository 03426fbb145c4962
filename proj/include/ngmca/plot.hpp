#pragma once

// SVG line charts of a campaign summary: one line per series with SEM error
// bars, plus a sidecar CSV holding exactly the plotted numbers.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ngmca/bench.hpp"

namespace ngmca {

struct PlotPoint {
  double x = 0.0;
  double mean = 0.0;
  double sem = 0.0;
  int count = 0;
};

struct PlotSeries {
  /// Algorithm id, followed by the other axes that vary across the summary.
  std::string label;
  std::string algorithm_id;
  std::vector<PlotPoint> points;
};

/// Groups summary rows into series along `x_axis`. Points with a non-finite
/// x or mean are left out.
inline std::vector<PlotSeries> plot_series(const std::vector<SummaryRow>& summary, const std::string& x_axis) {
  const auto& axes = grid_axes();
  if (std::find(axes.begin(), axes.end(), x_axis) == axes.end())
    throw Error(ErrorCode::UnknownAxis, "cannot plot against '" + x_axis + "'");
  if (summary.empty()) throw Error(ErrorCode::EmptyInput, "nothing to plot: the summary is empty");

  std::vector<std::string> varying;
  for (const auto& axis : axes) {
    if (axis == x_axis) continue;
    const double first = axis_value(summary.front().cell, axis);
    for (const auto& row : summary)
      if (axis_value(row.cell, axis) != first) {
        varying.push_back(axis);
        break;
      }
  }

  std::vector<PlotSeries> series;
  for (const auto& row : summary) {
    std::string label = row.algorithm_id;
    for (const auto& axis : varying) label += " " + axis + "=" + format_double(axis_value(row.cell, axis));
    auto it = std::find_if(series.begin(), series.end(), [&](const PlotSeries& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back({label, row.algorithm_id, {}});
      it = series.end() - 1;
    }
    const double x = axis_value(row.cell, x_axis);
    if (!std::isfinite(x) || !std::isfinite(row.mean)) continue;
    it->points.push_back({x, row.mean, std::isfinite(row.sem) ? row.sem : 0.0, row.count});
  }
  std::erase_if(series, [](const PlotSeries& s) { return s.points.empty(); });
  if (series.empty()) throw Error(ErrorCode::EmptyInput, "nothing to plot: no finite points");
  for (auto& s : series)
    std::stable_sort(s.points.begin(), s.points.end(), [](const PlotPoint& a, const PlotPoint& b) { return a.x < b.x; });
  return series;
}

inline std::filesystem::path plot_sidecar_path(const std::filesystem::path& svg) {
  std::filesystem::path p = svg;
  p.replace_extension(".csv");
  return p;
}

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Roughly five round tick values covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

}  // namespace detail

/// Writes the chart to `out` and the plotted points to the same path with a
/// .csv extension.
inline void emit_plot(const std::vector<SummaryRow>& summary, const std::string& x_axis,
                      const std::filesystem::path& out) {
  const std::vector<PlotSeries> series = plot_series(summary, x_axis);
  std::string metric = summary.front().metric;

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
      y_lo = std::min(y_lo, p.mean - p.sem);
      y_hi = std::max(y_hi, p.mean + p.sem);
    }
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  constexpr double width = 720, height = 440, left = 70, right = 200, top = 30, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fixed(width, 0) + "\" height=\"" +
         detail::fixed(height, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<g stroke=\"black\" fill=\"none\"><rect x=\"" + detail::fixed(left) + "\" y=\"" + detail::fixed(top) +
         "\" width=\"" + detail::fixed(pw) + "\" height=\"" + detail::fixed(ph) + "\"/></g>\n";
  for (double t : detail::nice_ticks(x_lo, x_hi)) {
    svg += "<line x1=\"" + detail::fixed(px(t)) + "\" y1=\"" + detail::fixed(top + ph) + "\" x2=\"" +
           detail::fixed(px(t)) + "\" y2=\"" + detail::fixed(top + ph + 5) + "\" stroke=\"black\"/>";
    svg += "<text x=\"" + detail::fixed(px(t)) + "\" y=\"" + detail::fixed(top + ph + 18) +
           "\" text-anchor=\"middle\">" + format_double(t) + "</text>\n";
  }
  for (double t : detail::nice_ticks(y_lo, y_hi)) {
    svg += "<line x1=\"" + detail::fixed(left - 5) + "\" y1=\"" + detail::fixed(py(t)) + "\" x2=\"" +
           detail::fixed(left) + "\" y2=\"" + detail::fixed(py(t)) + "\" stroke=\"black\"/>";
    svg += "<text x=\"" + detail::fixed(left - 8) + "\" y=\"" + detail::fixed(py(t) + 4) + "\" text-anchor=\"end\">" +
           format_double(t) + "</text>\n";
  }
  svg += "<text x=\"" + detail::fixed(left + pw / 2) + "\" y=\"" + detail::fixed(height - 12) +
         "\" text-anchor=\"middle\">" + detail::svg_escape(x_axis) + "</text>\n";
  svg += "<text transform=\"translate(18," + detail::fixed(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         detail::svg_escape(metric) + "</text>\n";

  std::string sidecar = csv_row({"series", "algorithm_id", x_axis, "mean", "sem", "count"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    const std::string color = palette[i % std::size(palette)];
    svg += "<g class=\"series\" data-label=\"" + detail::svg_escape(s.label) + "\">\n";
    std::string pts;
    for (const auto& p : s.points) {
      svg += "<!-- " + detail::svg_escape(s.label) + " " + x_axis + "=" + format_double(p.x) + " mean=" +
             format_double(p.mean) + " sem=" + format_double(p.sem) + " -->\n";
      if (!pts.empty()) pts += ' ';
      pts += detail::fixed(px(p.x)) + "," + detail::fixed(py(p.mean));
      if (p.sem > 0.0)
        svg += "<line class=\"errorbar\" x1=\"" + detail::fixed(px(p.x)) + "\" y1=\"" + detail::fixed(py(p.mean - p.sem)) +
               "\" x2=\"" + detail::fixed(px(p.x)) + "\" y2=\"" + detail::fixed(py(p.mean + p.sem)) + "\" stroke=\"" +
               color + "\"/>\n";
      sidecar += csv_row({s.label, s.algorithm_id, format_double(p.x), format_double(p.mean), format_double(p.sem),
                          std::to_string(p.count)});
    }
    svg += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + color + "\" points=\"" + pts + "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    svg += "<line x1=\"" + detail::fixed(left + pw + 12) + "\" y1=\"" + detail::fixed(ly) + "\" x2=\"" +
           detail::fixed(left + pw + 32) + "\" y2=\"" + detail::fixed(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>";
    svg += "<text x=\"" + detail::fixed(left + pw + 38) + "\" y=\"" + detail::fixed(ly + 4) + "\">" +
           detail::svg_escape(s.label) + "</text>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";

  if (!out.parent_path().empty()) std::filesystem::create_directories(out.parent_path());
  write_text_file(out, svg);
  write_text_file(plot_sidecar_path(out), sidecar);
}

}  // namespace ngmca
