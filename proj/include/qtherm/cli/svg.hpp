#pragma once

// Minimal self-contained SVG line charts. Plots are a convenience; the CSV
// files are the data contract.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "qtherm/cli/config.hpp"

namespace qtherm::cli {

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

struct SvgChart {
  std::string title, x_label, y_label;
  std::vector<SvgSeries> series;
};

namespace detail {
inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}
}  // namespace detail

inline void write_svg(const std::filesystem::path& path, const SvgChart& chart) {
  constexpr double W = 720, H = 440, L = 80, R = 170, T = 40, B = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series)
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error("cannot write " + path.string());
  using detail::fixed;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(chart.title)
    << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << detail::tick(xv)
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4) << "\" text-anchor=\"end\">" << detail::tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
    << detail::escape(chart.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::escape(chart.y_label) << "</text>\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& ser = chart.series[s];
    const char* col = colors[s % 8];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\""
      << (ser.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t k = 0; k < ser.x.size() && k < ser.y.size(); ++k) {
      if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
      o << fixed(px(ser.x[k])) << "," << fixed(py(ser.y[k])) << " ";
    }
    o << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 34 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << (ser.dashed ? " stroke-dasharray=\"6,4\"" : "")
      << "/>\n";
    o << "<text x=\"" << W - R + 40 << "\" y=\"" << ly << "\">" << detail::escape(ser.label) << "</text>\n";
  }
  o << "</svg>\n";
}

}  // namespace qtherm::cli
