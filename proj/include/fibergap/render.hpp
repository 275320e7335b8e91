#pragma once

#include <string>
#include <vector>

namespace fibergap {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = true;  // false: plain polyline (model overlays)
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;  // series[0] is the data table
};

// SVG line plot. EmptyTable when the data series has fewer than 2 rows.
// Non-positive values are skipped on log axes.
std::string render_svg(const PlotSpec& plot);
void write_svg(const PlotSpec& plot, const std::string& path);

}  // namespace fibergap
