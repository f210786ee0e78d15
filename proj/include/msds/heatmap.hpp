#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "msds/interp.hpp"
#include "msds/tensor.hpp"

namespace msds {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  bool visible = true;
};

/// Ordered, semantically indexed keypoints in pixel coordinates.
struct KeypointSet {
  std::vector<Keypoint> points;
  int image_width = 0;
  int image_height = 0;

  int count() const { return static_cast<int>(points.size()); }
};

/// Per-keypoint Gaussian response maps, one channel per keypoint.
template <typename S>
class Heatmap {
 public:
  Heatmap() = default;
  Heatmap(int channels, int h, int w, int scale_id = 0)
      : channels_(channels), h_(h), w_(w), scale_id_(scale_id) {
    require(channels >= 1 && h >= 1 && w >= 1, "Heatmap: dims must be >= 1");
    data_ = ArrayX<S>::Zero(static_cast<Eigen::Index>(channels) * h * w);
  }

  int channels() const { return channels_; }
  int height() const { return h_; }
  int width() const { return w_; }
  int scale_id() const { return scale_id_; }
  void set_scale_id(int s) { scale_id_ = s; }

  S& operator()(int k, int y, int x) { return data_[offset(k, y, x)]; }
  S operator()(int k, int y, int x) const { return data_[offset(k, y, x)]; }

  ArrayX<S>& array() { return data_; }
  const ArrayX<S>& array() const { return data_; }

  Eigen::Map<ArrayX<S>> channel(int k) {
    return {data_.data() + static_cast<Eigen::Index>(k) * h_ * w_,
            static_cast<Eigen::Index>(h_) * w_};
  }
  Eigen::Map<const ArrayX<S>> channel(int k) const {
    return {data_.data() + static_cast<Eigen::Index>(k) * h_ * w_,
            static_cast<Eigen::Index>(h_) * w_};
  }

  bool same_shape(const Heatmap& o) const {
    return channels_ == o.channels_ && h_ == o.h_ && w_ == o.w_;
  }

 private:
  Eigen::Index offset(int k, int y, int x) const {
    return (static_cast<Eigen::Index>(k) * h_ + y) * w_ + x;
  }

  int channels_ = 0, h_ = 0, w_ = 0, scale_id_ = 0;
  ArrayX<S> data_;
};

/// Encodes keypoints as unnormalized isotropic Gaussians, one channel per
/// keypoint: exp(-((x-xk)^2 + (y-yk)^2) / (2 * sigma_sq)) sampled at pixel
/// centers. Invisible keypoints yield an all-zero channel.
template <typename S>
Heatmap<S> encode_heatmap(const KeypointSet& kps, double sigma_sq, int out_h,
                          int out_w) {
  require(kps.count() >= 1, "encode_heatmap: empty keypoint set");
  require(out_h >= 1 && out_w >= 1, "encode_heatmap: output dims must be >= 1");
  require(sigma_sq > 0.0, "encode_heatmap: sigma_sq must be positive");

  Heatmap<S> hm(kps.count(), out_h, out_w);
  const double inv = 1.0 / (2.0 * sigma_sq);
  for (int k = 0; k < kps.count(); ++k) {
    const Keypoint& p = kps.points[static_cast<size_t>(k)];
    if (!p.visible) continue;
    if (p.x < 0.0 || p.x >= kps.image_width || p.y < 0.0 ||
        p.y >= kps.image_height) {
      throw std::invalid_argument(
          "encode_heatmap: visible keypoint " + std::to_string(k) +
          " outside image bounds (" + std::to_string(p.x) + "," +
          std::to_string(p.y) + ")");
    }
    for (int y = 0; y < out_h; ++y) {
      const double dy = y - p.y;
      for (int x = 0; x < out_w; ++x) {
        const double dx = x - p.x;
        hm(k, y, x) = static_cast<S>(std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  return hm;
}

/// Align-corners bilinear resize of every channel.
template <typename S>
Heatmap<S> resize_heatmap(const Heatmap<S>& hm, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, "resize_heatmap: output dims must be >= 1");
  if (out_h == hm.height() && out_w == hm.width()) return hm;
  Heatmap<S> out(hm.channels(), out_h, out_w, hm.scale_id());
  for (int k = 0; k < hm.channels(); ++k) {
    bilinear_resize_plane(hm.channel(k).data(), hm.height(), hm.width(),
                          out.channel(k).data(), out_h, out_w);
  }
  return out;
}

/// Integer argmax per channel; ties resolved by smallest row-major index.
/// Every decoded keypoint is flagged visible.
template <typename S>
KeypointSet decode_keypoints(const Heatmap<S>& hm) {
  require(hm.channels() >= 1, "decode_keypoints: empty heatmap");
  KeypointSet kps;
  kps.image_width = hm.width();
  kps.image_height = hm.height();
  kps.points.resize(static_cast<size_t>(hm.channels()));
  for (int k = 0; k < hm.channels(); ++k) {
    S best = hm(k, 0, 0);
    int best_y = 0, best_x = 0;
    for (int y = 0; y < hm.height(); ++y) {
      for (int x = 0; x < hm.width(); ++x) {
        if (hm(k, y, x) > best) {
          best = hm(k, y, x);
          best_y = y;
          best_x = x;
        }
      }
    }
    kps.points[static_cast<size_t>(k)] = {static_cast<double>(best_x),
                                          static_cast<double>(best_y), true};
  }
  return kps;
}

}  // namespace msds
