#include "msds/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace msds {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw DatasetError(DatasetErrorKind::missing_file,
                       "missing file: " + path.string());
  }
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw DatasetError(DatasetErrorKind::malformed_annotation,
                       "malformed annotations in " + path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& root) {
  const auto ann_path = root / "annotations.json";
  const json j = parse_json_file(ann_path);
  if (!j.is_object() || !j.contains("num_keypoints") || !j.contains("records")) {
    throw DatasetError(DatasetErrorKind::malformed_annotation,
                       ann_path.string() + ": expected {num_keypoints, records}");
  }

  Dataset ds;
  ds.root = root;
  try {
    ds.num_keypoints = j.at("num_keypoints").get<int>();
    if (ds.num_keypoints < 1) {
      throw DatasetError(DatasetErrorKind::malformed_annotation,
                         ann_path.string() + ": num_keypoints must be >= 1");
    }
    for (const auto& rj : j.at("records")) {
      DatasetRecord rec;
      rec.id = rj.at("id").get<std::string>();
      rec.image = rj.at("image").get<std::string>();
      const auto& kps = rj.at("keypoints");
      if (static_cast<int>(kps.size()) != ds.num_keypoints) {
        throw DatasetError(
            DatasetErrorKind::inconsistent_keypoints,
            "record " + rec.id + ": has " + std::to_string(kps.size()) +
                " keypoints, dataset declares " + std::to_string(ds.num_keypoints));
      }
      for (const auto& kj : kps) {
        Keypoint p;
        p.x = kj.at("x").get<double>();
        p.y = kj.at("y").get<double>();
        p.visible = kj.at("v").get<int>() != 0;
        rec.keypoints.points.push_back(p);
      }
      if (!std::filesystem::exists(root / rec.image)) {
        throw DatasetError(DatasetErrorKind::missing_file,
                           "record " + rec.id + ": image not found: " +
                               (root / rec.image).string());
      }
      ds.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DatasetError(DatasetErrorKind::malformed_annotation,
                       ann_path.string() + ": " + e.what());
  }
  return ds;
}

SplitDataset split_dataset(const std::vector<DatasetRecord>& records,
                           SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0) {
    throw std::invalid_argument("split_dataset: ratios must be positive");
  }
  const size_t n = records.size();
  if (n < 3) {
    throw std::invalid_argument("split_dataset: fewer records than parts");
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (size_t i = n - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }

  // Largest-remainder apportionment of n into the three ratio parts.
  const double total = ratios.train + ratios.val + ratios.test;
  const double exact[3] = {n * ratios.train / total, n * ratios.val / total,
                           n * ratios.test / total};
  size_t sizes[3];
  double fracs[3];
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<size_t>(std::floor(exact[i]));
    fracs[i] = exact[i] - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (fracs[i] > fracs[best]) best = i;
    }
    ++sizes[best];
    fracs[best] = -1.0;
    ++assigned;
  }
  // Every part keeps at least one record.
  for (int i = 0; i < 3; ++i) {
    while (sizes[i] == 0) {
      int donor = 0;
      for (int d = 1; d < 3; ++d) {
        if (sizes[d] > sizes[donor]) donor = d;
      }
      --sizes[donor];
      ++sizes[i];
    }
  }

  SplitDataset out;
  size_t pos = 0;
  const auto take = [&](std::vector<DatasetRecord>& dst, size_t count, Split split) {
    for (size_t i = 0; i < count; ++i) {
      DatasetRecord rec = records[order[pos++]];
      rec.split = split;
      dst.push_back(std::move(rec));
    }
  };
  take(out.train, sizes[0], Split::train);
  take(out.val, sizes[1], Split::val);
  take(out.test, sizes[2], Split::test);
  return out;
}

void generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_root) {
  if (spec.num_images < 1 || spec.image_size < 8 || spec.num_keypoints < 1) {
    throw std::invalid_argument("generate_synthetic: invalid spec");
  }
  if (spec.blob_radius_min < 1.0 || spec.blob_radius_max < spec.blob_radius_min) {
    throw std::invalid_argument("generate_synthetic: invalid blob radius range");
  }
  if (spec.noise_level < 0.0 || spec.noise_level > 1.0) {
    throw std::invalid_argument("generate_synthetic: noise_level must be in [0, 1]");
  }

  std::filesystem::create_directories(out_root / "images");
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int size = spec.image_size;
  nlohmann::json records = nlohmann::json::array();

  for (int i = 0; i < spec.num_images; ++i) {
    const int margin = static_cast<int>(std::ceil(spec.blob_radius_max)) + 2;
    if (2 * margin >= size) {
      throw std::invalid_argument("generate_synthetic: image too small for blob radius");
    }

    // Low-frequency background texture.
    double phase[3], freq_x[3], freq_y[3];
    for (int c = 0; c < 3; ++c) {
      phase[c] = unit(rng) * 2.0 * M_PI;
      freq_x[c] = 0.002 + 0.008 * unit(rng);
      freq_y[c] = 0.002 + 0.008 * unit(rng);
    }

    std::vector<double> cx(static_cast<size_t>(spec.num_keypoints));
    std::vector<double> cy(static_cast<size_t>(spec.num_keypoints));
    std::vector<double> radius(static_cast<size_t>(spec.num_keypoints));
    for (int k = 0; k < spec.num_keypoints; ++k) {
      radius[static_cast<size_t>(k)] =
          spec.blob_radius_min + (spec.blob_radius_max - spec.blob_radius_min) * unit(rng);
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const int px = margin + static_cast<int>(unit(rng) * (size - 2 * margin));
        const int py = margin + static_cast<int>(unit(rng) * (size - 2 * margin));
        placed = true;
        for (int j = 0; j < k; ++j) {
          const double dx = px - cx[static_cast<size_t>(j)];
          const double dy = py - cy[static_cast<size_t>(j)];
          const double min_sep = 2.0 * std::max(radius[static_cast<size_t>(k)],
                                                radius[static_cast<size_t>(j)]);
          // Keep left-to-right order unambiguous: centers must also be
          // separated along x by the same margin.
          if (dx * dx + dy * dy < min_sep * min_sep || std::abs(dx) < min_sep) {
            placed = false;
            break;
          }
        }
        if (placed) {
          cx[static_cast<size_t>(k)] = px;
          cy[static_cast<size_t>(k)] = py;
        }
      }
      if (!placed) {
        throw std::runtime_error(
            "generate_synthetic: could not satisfy blob separation after 1000 "
            "attempts (image " + std::to_string(i) + ")");
      }
    }

    // Blobs look alike; keypoint identity is positional (keypoint k is the
    // k-th blob from the left), so resolving it needs spatial context rather
    // than local appearance.
    {
      std::vector<int> order(static_cast<size_t>(spec.num_keypoints));
      for (int k = 0; k < spec.num_keypoints; ++k) order[static_cast<size_t>(k)] = k;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (cx[static_cast<size_t>(a)] != cx[static_cast<size_t>(b)]) {
          return cx[static_cast<size_t>(a)] < cx[static_cast<size_t>(b)];
        }
        return cy[static_cast<size_t>(a)] < cy[static_cast<size_t>(b)];
      });
      std::vector<double> sx(cx.size()), sy(cy.size()), sr(radius.size());
      for (size_t k = 0; k < order.size(); ++k) {
        sx[k] = cx[static_cast<size_t>(order[k])];
        sy[k] = cy[static_cast<size_t>(order[k])];
        sr[k] = radius[static_cast<size_t>(order[k])];
      }
      cx = sx;
      cy = sy;
      radius = sr;
    }

    ImageU8 img;
    img.width = size;
    img.height = size;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double val[3];
        for (int c = 0; c < 3; ++c) {
          val[c] = 0.22 + 0.10 * std::sin(2.0 * M_PI * (freq_x[c] * x + freq_y[c] * y) + phase[c]);
        }
        for (int k = 0; k < spec.num_keypoints; ++k) {
          const double dx = x - cx[static_cast<size_t>(k)];
          const double dy = y - cy[static_cast<size_t>(k)];
          const double r2 = radius[static_cast<size_t>(k)] * radius[static_cast<size_t>(k)];
          const double d2 = dx * dx + dy * dy;
          if (d2 < r2) {
            const double bump = (1.0 - d2 / r2) * (1.0 - d2 / r2);
            val[0] += 0.70 * bump;
            val[1] += 0.62 * bump;
            val[2] += 0.55 * bump;
          }
        }
        for (int c = 0; c < 3; ++c) {
          double v = val[c];
          if (spec.noise_level > 0.0) {
            v += spec.noise_level * 0.25 * (unit(rng) - 0.5);
          }
          v = std::min(1.0, std::max(0.0, v));
          img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }

    char name[64];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    const std::string image_rel = std::string("images/") + name + ".png";
    write_png(out_root / image_rel, img);

    nlohmann::json kp_list = nlohmann::json::array();
    for (int k = 0; k < spec.num_keypoints; ++k) {
      kp_list.push_back({{"x", cx[static_cast<size_t>(k)]},
                         {"y", cy[static_cast<size_t>(k)]},
                         {"v", 1}});
    }
    records.push_back({{"id", name}, {"image", image_rel}, {"keypoints", kp_list}});
  }

  nlohmann::json ann;
  ann["num_keypoints"] = spec.num_keypoints;
  ann["records"] = records;
  std::ofstream f(out_root / "annotations.json", std::ios::trunc);
  if (!f) {
    throw std::runtime_error("generate_synthetic: cannot write annotations.json");
  }
  f << ann.dump(2) << "\n";
}

}  // namespace msds
