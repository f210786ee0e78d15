#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace msds {

/// Line plot of a sampled signal with optional circle markers; returns a
/// standalone SVG document.
std::string svg_signal_plot(const std::vector<double>& values,
                            const std::vector<size_t>& marks,
                            const std::string& title,
                            const std::string& x_label,
                            const std::string& y_label);

/// x/y curve plot (e.g. PCK against threshold).
std::string svg_curve_plot(const std::vector<double>& xs,
                           const std::vector<double>& ys,
                           const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label);

}  // namespace msds
