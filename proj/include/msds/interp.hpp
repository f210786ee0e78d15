#pragma once

#include <vector>

#include "msds/tensor.hpp"

namespace msds {

/// One output sample of an align-corners bilinear axis: blends input
/// samples lo and hi with weight (1-t) and t.
struct AxisCoeff {
  int lo = 0;
  int hi = 0;
  double t = 0.0;
};

/// Align-corners sampling positions: output i maps to input
/// i * (in - 1) / (out - 1); a single output sample maps to input 0.
inline std::vector<AxisCoeff> bilinear_axis(int in_size, int out_size) {
  require(in_size >= 1 && out_size >= 1, "bilinear_axis: sizes must be >= 1");
  std::vector<AxisCoeff> coeffs(static_cast<size_t>(out_size));
  if (out_size == 1 || in_size == 1) {
    for (auto& c : coeffs) c = {0, 0, 0.0};
    return coeffs;
  }
  const double scale = static_cast<double>(in_size - 1) / (out_size - 1);
  for (int i = 0; i < out_size; ++i) {
    double pos = i * scale;
    int lo = static_cast<int>(pos);
    if (lo > in_size - 2) lo = in_size - 2;
    coeffs[static_cast<size_t>(i)] = {lo, lo + 1, pos - lo};
  }
  return coeffs;
}

/// Resizes one (h, w) plane into (out_h, out_w) with align-corners bilinear
/// interpolation. Pointers address row-major planes.
template <typename S>
void bilinear_resize_plane(const S* src, int h, int w, S* dst, int out_h,
                           int out_w) {
  const auto ys = bilinear_axis(h, out_h);
  const auto xs = bilinear_axis(w, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const AxisCoeff& cy = ys[static_cast<size_t>(oy)];
    const S* row_lo = src + static_cast<std::ptrdiff_t>(cy.lo) * w;
    const S* row_hi = src + static_cast<std::ptrdiff_t>(cy.hi) * w;
    S* out_row = dst + static_cast<std::ptrdiff_t>(oy) * out_w;
    for (int ox = 0; ox < out_w; ++ox) {
      const AxisCoeff& cx = xs[static_cast<size_t>(ox)];
      const double top = (1.0 - cx.t) * row_lo[cx.lo] + cx.t * row_lo[cx.hi];
      const double bot = (1.0 - cx.t) * row_hi[cx.lo] + cx.t * row_hi[cx.hi];
      out_row[ox] = static_cast<S>((1.0 - cy.t) * top + cy.t * bot);
    }
  }
}

}  // namespace msds
