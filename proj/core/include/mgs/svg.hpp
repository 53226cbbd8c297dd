#pragma once

#include <string>
#include <vector>

namespace mgs {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as y
  std::vector<double> hi;
  bool scatter = false;
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
};

// Dependency-free line/scatter chart with optional percentile bands.
std::string render_svg(const SvgPlot& plot, int width = 640, int height = 420);

}  // namespace mgs
