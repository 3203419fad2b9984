#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fraudbench/dimred.hpp"
#include "fraudbench/preprocess.hpp"

namespace fraudbench {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// The raw points ride along next to every plot so downstream tooling never
// has to parse SVG.
inline std::string scatter_companion_csv_path(const std::string& svg_path) {
  if (svg_path.size() >= 4 && svg_path.ends_with(".svg"))
    return svg_path.substr(0, svg_path.size() - 4) + ".csv";
  return svg_path + ".csv";
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

// Self-contained SVG scatter plot: one circle per point, class given by the
// row label, both axes padded by 5% of the data range. Also writes the
// companion CSV of raw points.
inline void emit_scatter_svg(const Embedding2D& e, const std::string& path) {
  if (e.points.rows() == 0)
    throw std::runtime_error("scatter plot: empty embedding");
  if (e.points.cols() != 2)
    throw std::runtime_error("scatter plot: embedding must have 2 columns");
  if (e.labels.size() != e.points.rows())
    throw std::runtime_error("scatter plot: label count mismatch");

  double xmin = e.points(0, 0), xmax = xmin;
  double ymin = e.points(0, 1), ymax = ymin;
  for (std::size_t r = 0; r < e.points.rows(); ++r) {
    xmin = std::min(xmin, e.points(r, 0));
    xmax = std::max(xmax, e.points(r, 0));
    ymin = std::min(ymin, e.points(r, 1));
    ymax = std::max(ymax, e.points(r, 1));
  }
  // A degenerate range still needs a nonzero canvas.
  const double xpad = 0.05 * (xmax > xmin ? xmax - xmin : 1.0);
  const double ypad = 0.05 * (ymax > ymin ? ymax - ymin : 1.0);
  const double x0 = xmin - xpad, x1 = xmax + xpad;
  const double y0 = ymin - ypad, y1 = ymax + ypad;
  const double width = 800.0, height = 600.0;
  const auto px = [&](double x) { return (x - x0) / (x1 - x0) * width; };
  const auto py = [&](double y) { return height - (y - y0) / (y1 - y0) * height; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
  svg += "<style>.c0{fill:#4477aa;}.c1{fill:#cc4455;}"
         ".frame{fill:none;stroke:#888;}text{font:12px sans-serif;fill:#444;}"
         "</style>\n";
  svg += "<rect class=\"frame\" x=\"0.5\" y=\"0.5\" width=\"799\" height=\"599\"/>\n";
  svg += "<text x=\"6\" y=\"594\">x: " + detail::fixed2(xmin) + " to " +
         detail::fixed2(xmax) + "</text>\n";
  svg += "<text x=\"6\" y=\"16\">y: " + detail::fixed2(ymin) + " to " +
         detail::fixed2(ymax) + " (" + to_string(e.method) + ")</text>\n";
  for (std::size_t r = 0; r < e.points.rows(); ++r) {
    svg += "<circle cx=\"" + detail::fixed2(px(e.points(r, 0))) + "\" cy=\"" +
           detail::fixed2(py(e.points(r, 1))) + "\" r=\"3\" class=\"c" +
           std::to_string(e.labels[r] == 1 ? 1 : 0) + "\"/>\n";
  }
  svg += "</svg>\n";

  write_text_file(path, svg);
  write_text_file(scatter_companion_csv_path(path), embedding_to_csv(e));
}

inline void emit_correlation_csv(const CorrelationMatrix& cm, const std::string& path) {
  write_text_file(path, correlation_to_csv(cm));
}

}  // namespace fraudbench
