#pragma once

#include <string>
#include <vector>

namespace coretherm {

// Minimal static-plot writer for the run reports.
struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  std::string label;
  bool points = false;  // scatter instead of polyline
};

struct SvgChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  std::vector<double> h_lines;  // dashed horizontal guides
  bool log_x = false;
};

void write_svg_chart(const std::string& path, const SvgChart& chart);

}  // namespace coretherm
