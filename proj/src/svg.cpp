#include "msds/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace msds {

namespace {

constexpr double kWidth = 720.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

struct Frame {
  double x_min, x_max, y_min, y_max;

  double px(double x) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return kLeft + (x - x_min) / span * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y_max > y_min ? y_max - y_min : 1.0;
    return kHeight - kBottom - (y - y_min) / span * (kHeight - kTop - kBottom);
  }
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string plot(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::vector<size_t>& marks, const std::string& title,
                 const std::string& x_label, const std::string& y_label) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw std::invalid_argument("svg plot: empty or mismatched series");
  }
  Frame f{};
  f.x_min = *std::min_element(xs.begin(), xs.end());
  f.x_max = *std::max_element(xs.begin(), xs.end());
  f.y_min = *std::min_element(ys.begin(), ys.end());
  f.y_max = *std::max_element(ys.begin(), ys.end());
  if (f.y_min == f.y_max) {
    f.y_min -= 1.0;
    f.y_max += 1.0;
  }

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "viewBox=\"0 0 %g %g\">\n",
                kWidth, kHeight, kWidth, kHeight);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">%s</text>\n",
                kWidth / 2, title.c_str());
  svg += buf;

  // Axes.
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                kLeft, kTop, kLeft, kHeight - kBottom);
  svg += buf;

  // Tick labels at the extremes.
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" font-family=\"sans-serif\">%s</text>\n",
                kLeft, kHeight - kBottom + 16, fmt(f.x_min).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">%s</text>\n",
                kWidth - kRight, kHeight - kBottom + 16, fmt(f.x_max).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">%s</text>\n",
                kLeft - 6, kHeight - kBottom, fmt(f.y_min).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">%s</text>\n",
                kLeft - 6, kTop + 8, fmt(f.y_max).c_str());
  svg += buf;

  // Axis labels.
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">%s</text>\n",
                (kLeft + kWidth - kRight) / 2, kHeight - 12, x_label.c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"16\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\" transform=\"rotate(-90 16 %g)\">%s</text>\n",
                (kTop + kHeight - kBottom) / 2, (kTop + kHeight - kBottom) / 2,
                y_label.c_str());
  svg += buf;

  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", f.px(xs[i]), f.py(ys[i]));
    svg += buf;
  }
  svg += "\"/>\n";

  for (size_t m : marks) {
    if (m >= xs.size()) continue;
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"none\" "
                  "stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
                  f.px(xs[m]), f.py(ys[m]));
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::string svg_signal_plot(const std::vector<double>& values,
                            const std::vector<size_t>& marks,
                            const std::string& title, const std::string& x_label,
                            const std::string& y_label) {
  std::vector<double> xs(values.size());
  for (size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  return plot(xs, values, marks, title, x_label, y_label);
}

std::string svg_curve_plot(const std::vector<double>& xs,
                           const std::vector<double>& ys, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
  return plot(xs, ys, {}, title, x_label, y_label);
}

}  // namespace msds
