#include "coretherm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "coretherm/common.hpp"
#include "coretherm/csv.hpp"

namespace coretherm {

namespace {

constexpr double kW = 760, kH = 460;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void absorb(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(lo < hi)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_svg_chart(const std::string& path, const SvgChart& chart) {
  Range rx, ry;
  for (const auto& s : chart.series) {
    for (double v : s.x) rx.absorb(chart.log_x ? std::log10(std::max(v, 1e-300)) : v);
    for (double v : s.y) ry.absorb(v);
  }
  for (double h : chart.h_lines) ry.absorb(h);
  rx.pad();
  ry.pad();

  const auto px = [&](double v) {
    const double t = chart.log_x ? std::log10(std::max(v, 1e-300)) : v;
    return kLeft + (t - rx.lo) / (rx.hi - rx.lo) * (kW - kLeft - kRight);
  };
  const auto py = [&](double v) {
    return kH - kBottom - (v - ry.lo) / (ry.hi - ry.lo) * (kH - kTop - kBottom);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-size=\"15\" font-family=\"sans-serif\">"
      << esc(chart.title) << "</text>\n";

  // Axes with a handful of ticks.
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\""
      << kW - kRight << "\" y2=\"" << kH - kBottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / 5.0;
    const double fy = ry.lo + (ry.hi - ry.lo) * i / 5.0;
    const double xx = kLeft + (kW - kLeft - kRight) * i / 5.0;
    const double yy = kH - kBottom - (kH - kTop - kBottom) * i / 5.0;
    out << "<line x1=\"" << xx << "\" y1=\"" << kH - kBottom << "\" x2=\""
        << xx << "\" y2=\"" << kH - kBottom + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << xx << "\" y=\"" << kH - kBottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" "
           "font-family=\"sans-serif\">"
        << fmt_short(chart.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << yy << "\" x2=\""
        << kLeft << "\" y2=\"" << yy << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << yy + 4
        << "\" text-anchor=\"end\" font-size=\"11\" "
           "font-family=\"sans-serif\">"
        << fmt_short(fy) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" "
         "font-family=\"sans-serif\">"
      << esc(chart.x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (kTop + kH - kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 18 "
      << (kTop + kH - kBottom) / 2 << ")\">" << esc(chart.y_label)
      << "</text>\n";

  for (double h : chart.h_lines)
    out << "<line x1=\"" << kLeft << "\" y1=\"" << py(h) << "\" x2=\""
        << kW - kRight << "\" y2=\"" << py(h)
        << "\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n";

  double legend_y = kTop + 6;
  for (const auto& s : chart.series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
            << "\" r=\"2.4\" fill=\"" << s.color << "\" fill-opacity=\"0.7\"/>\n";
    } else if (!s.x.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.6\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      out << "\"/>\n";
    }
    if (!s.label.empty()) {
      out << "<rect x=\"" << kW - kRight - 170 << "\" y=\"" << legend_y - 9
          << "\" width=\"12\" height=\"12\" fill=\"" << s.color << "\"/>\n";
      out << "<text x=\"" << kW - kRight - 152 << "\" y=\"" << legend_y + 2
          << "\" font-size=\"12\" font-family=\"sans-serif\">" << esc(s.label)
          << "</text>\n";
      legend_y += 18;
    }
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace coretherm
