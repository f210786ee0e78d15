#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msds/heatmap.hpp"
#include "msds/image_io.hpp"
#include "msds/interp.hpp"
#include "msds/tensor.hpp"

namespace msds {

enum class DatasetErrorKind {
  missing_file,
  malformed_annotation,
  inconsistent_keypoints,
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  DatasetErrorKind kind() const { return kind_; }

 private:
  DatasetErrorKind kind_;
};

enum class Split { train, val, test };

struct DatasetRecord {
  std::string id;
  std::string image;  // path relative to the dataset root
  KeypointSet keypoints;
  Split split = Split::train;
};

struct Dataset {
  std::filesystem::path root;
  int num_keypoints = 0;
  std::vector<DatasetRecord> records;
};

/// Loads annotations.json + images/ from a dataset root. Validates the
/// schema, keypoint-count consistency, and that every referenced image
/// exists.
Dataset load_dataset(const std::filesystem::path& root);

struct SplitRatios {
  int train = 8, val = 1, test = 1;
};

struct SplitDataset {
  std::vector<DatasetRecord> train, val, test;
};

/// Deterministic seeded shuffle followed by a largest-remainder partition;
/// the three parts are disjoint and cover the input.
SplitDataset split_dataset(const std::vector<DatasetRecord>& records,
                           SplitRatios ratios, std::uint64_t seed);

struct SynthSpec {
  int num_images = 64;
  int image_size = 64;
  int num_keypoints = 3;
  double blob_radius_min = 4.0;
  double blob_radius_max = 7.0;
  double noise_level = 0.0;  // in [0, 1]
  std::uint64_t rng_seed = 1;
};

/// Renders num_images images of K soft-edged colored blobs on a smoothly
/// textured background and writes images/ + annotations.json. Keypoint k is
/// the center of blob k; blob colors are a fixed per-keypoint palette so the
/// identity of each keypoint is visually determined. Deterministic in
/// rng_seed.
void generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_root);

/// Decoded sample resized to the network input; keypoint coordinates are
/// rescaled by target/original exactly.
template <typename S>
struct LoadedSample {
  Tensor4<S> image;  // (1, 3, H, W), values in [0, 1]
  KeypointSet keypoints;
};

template <typename S>
LoadedSample<S> load_sample(const std::filesystem::path& root,
                            const DatasetRecord& rec, int target_h, int target_w) {
  const ImageU8 img = read_png(root / rec.image);
  if (img.channels != 3) {
    throw DatasetError(DatasetErrorKind::malformed_annotation,
                       "record " + rec.id + ": expected RGB image");
  }
  Tensor4<S> full(1, 3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    auto plane = full.plane(0, c);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        plane[static_cast<Eigen::Index>(y) * img.width + x] =
            static_cast<S>(img.at(y, x, c)) / S(255);
      }
    }
  }
  LoadedSample<S> out;
  if (img.height == target_h && img.width == target_w) {
    out.image = std::move(full);
  } else {
    out.image = Tensor4<S>(1, 3, target_h, target_w);
    for (int c = 0; c < 3; ++c) {
      bilinear_resize_plane(full.plane(0, c).data(), img.height, img.width,
                            out.image.plane(0, c).data(), target_h, target_w);
    }
  }
  out.keypoints = rec.keypoints;
  out.keypoints.image_width = target_w;
  out.keypoints.image_height = target_h;
  const double fx = static_cast<double>(target_w) / img.width;
  const double fy = static_cast<double>(target_h) / img.height;
  for (auto& p : out.keypoints.points) {
    p.x *= fx;
    p.y *= fy;
  }
  return out;
}

template <typename S>
struct Batch {
  Tensor4<S> images;                        // (B, 3, H, W)
  Tensor4<S> labels;                        // (B, K, H, W)
  std::map<int, Tensor4<S>> scale_labels;   // scale id -> (B, K, Hs, Ws)
  std::vector<KeypointSet> keypoints;
};

/// Dims of each supervised scale's label, keyed by 1-based scale id.
using ScaleDims = std::vector<std::pair<int, std::pair<int, int>>>;

template <typename S>
std::vector<Batch<S>> make_batches(const std::vector<LoadedSample<S>>& samples,
                                   const std::vector<size_t>& order,
                                   int batch_size, double sigma_sq,
                                   const ScaleDims& scale_dims) {
  require(batch_size >= 1, "make_batches: batch_size must be >= 1");
  require(order.size() <= samples.size() || samples.empty() == order.empty(),
          "make_batches: order references absent samples");
  std::vector<Batch<S>> batches;
  if (order.empty()) return batches;
  const int target_h = samples[order[0]].image.height();
  const int target_w = samples[order[0]].image.width();
  const int k = samples[order[0]].keypoints.count();

  size_t pos = 0;
  while (pos < order.size()) {
    const int b = static_cast<int>(std::min<size_t>(static_cast<size_t>(batch_size),
                                                    order.size() - pos));
    Batch<S> batch;
    batch.images = Tensor4<S>(b, 3, target_h, target_w);
    batch.labels = Tensor4<S>(b, k, target_h, target_w);
    for (const auto& [scale, dims] : scale_dims) {
      batch.scale_labels[scale] = Tensor4<S>(b, k, dims.first, dims.second);
    }
    for (int i = 0; i < b; ++i) {
      const LoadedSample<S>& s = samples[order[pos + static_cast<size_t>(i)]];
      require(s.keypoints.count() == k, "make_batches: inconsistent keypoint count");
      batch.images.item(i) = s.image.item(0);
      const Heatmap<S> label = encode_heatmap<S>(s.keypoints, sigma_sq, target_h, target_w);
      for (int c = 0; c < k; ++c) batch.labels.plane(i, c) = label.channel(c);
      for (const auto& [scale, dims] : scale_dims) {
        const Heatmap<S> resized = resize_heatmap(label, dims.first, dims.second);
        for (int c = 0; c < k; ++c) {
          batch.scale_labels[scale].plane(i, c) = resized.channel(c);
        }
      }
      batch.keypoints.push_back(s.keypoints);
    }
    batches.push_back(std::move(batch));
    pos += static_cast<size_t>(b);
  }
  return batches;
}

/// Convenience path: decode + batch the records in their given order.
template <typename S>
std::vector<Batch<S>> make_batches(const std::filesystem::path& root,
                                   const std::vector<DatasetRecord>& records,
                                   int batch_size, int target_h, int target_w,
                                   double sigma_sq, const ScaleDims& scale_dims) {
  std::vector<LoadedSample<S>> samples;
  samples.reserve(records.size());
  for (const auto& r : records) {
    samples.push_back(load_sample<S>(root, r, target_h, target_w));
  }
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  return make_batches(samples, order, batch_size, sigma_sq, scale_dims);
}

}  // namespace msds
