#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace msds {

enum class Variant { full, upscale_only, downscale_only, no_deep_supervision };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::upscale_only: return "upscale_only";
    case Variant::downscale_only: return "downscale_only";
    case Variant::no_deep_supervision: return "no_deep_supervision";
  }
  return "full";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "upscale_only") return Variant::upscale_only;
  if (s == "downscale_only") return Variant::downscale_only;
  if (s == "no_deep_supervision" || s == "no_ds") return Variant::no_deep_supervision;
  throw std::invalid_argument(
      "unknown variant '" + s +
      "' (expected full|upscale_only|downscale_only|no_ds)");
}

/// Architecture hyperparameters. Scales are 1-based throughout: scale 1 is
/// the full-resolution sub-network, scale S the coarsest.
struct NetworkConfig {
  int stages = 3;  // M
  int scales = 5;  // S
  std::vector<std::pair<int, int>> strides = {{1, 1}, {2, 2}, {4, 4}, {8, 8}, {16, 16}};
  std::vector<int> channels = {16, 32, 32, 64, 64};
  int keypoints = 21;  // K
  std::vector<int> supervised_scales = {1, 2, 3};
  Variant variant = Variant::full;
  int input_h = 64;
  int input_w = 64;

  int scale_h(int s) const { return input_h / strides[static_cast<size_t>(s - 1)].first; }
  int scale_w(int s) const { return input_w / strides[static_cast<size_t>(s - 1)].second; }

  bool scale_supervised(int s) const {
    if (variant == Variant::no_deep_supervision) return false;
    return std::find(supervised_scales.begin(), supervised_scales.end(), s) !=
           supervised_scales.end();
  }

  /// Ratio between adjacent scale strides; conv_down runs at this stride and
  /// conv_up upsamples by it.
  std::pair<int, int> stride_ratio(int s) const {
    const auto& fine = strides[static_cast<size_t>(s - 2)];
    const auto& coarse = strides[static_cast<size_t>(s - 1)];
    return {coarse.first / fine.first, coarse.second / fine.second};
  }

  void validate() const {
    if (stages < 1) throw std::invalid_argument("NetworkConfig: stages must be >= 1");
    if (scales < 1) throw std::invalid_argument("NetworkConfig: scales must be >= 1");
    if (keypoints < 1) throw std::invalid_argument("NetworkConfig: keypoints must be >= 1");
    if (static_cast<int>(strides.size()) != scales) {
      throw std::invalid_argument("NetworkConfig: strides must list one pair per scale");
    }
    if (static_cast<int>(channels.size()) != scales) {
      throw std::invalid_argument("NetworkConfig: channels must list one width per scale");
    }
    for (int c : channels) {
      if (c < 1) throw std::invalid_argument("NetworkConfig: channel widths must be >= 1");
    }
    if (input_h < 1 || input_w < 1) {
      throw std::invalid_argument("NetworkConfig: input dims must be >= 1");
    }
    for (int s = 1; s <= scales; ++s) {
      const auto& [sy, sx] = strides[static_cast<size_t>(s - 1)];
      if (sy < 1 || sx < 1) {
        throw std::invalid_argument("NetworkConfig: strides must be >= 1");
      }
      if (sy != sx) {
        throw std::invalid_argument("NetworkConfig: only square strides are supported");
      }
      if (input_h % sy != 0 || input_w % sx != 0) {
        throw std::invalid_argument(
            "NetworkConfig: input dims must be divisible by every stride (scale " +
            std::to_string(s) + ")");
      }
      if (s >= 2) {
        const auto& [py, px] = strides[static_cast<size_t>(s - 2)];
        if (sy % py != 0 || sx % px != 0 || sy / py < 1 || sx / px < 1) {
          throw std::invalid_argument(
              "NetworkConfig: adjacent scale strides must divide evenly");
        }
      }
    }
    std::set<int> seen;
    for (int s : supervised_scales) {
      if (s < 1 || s > scales) {
        throw std::invalid_argument(
            "NetworkConfig: supervised scale " + std::to_string(s) + " out of range");
      }
      if (!seen.insert(s).second) {
        throw std::invalid_argument("NetworkConfig: duplicate supervised scale");
      }
    }
  }
};

/// Rejects JSON object keys outside the allowed set; typo safety for every
/// structured-text surface (run configs, checkpoints).
inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::vector<std::string>& allowed,
                                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + context);
    }
  }
}

inline nlohmann::json to_json(const NetworkConfig& cfg) {
  nlohmann::json j;
  j["stages"] = cfg.stages;
  j["scales"] = cfg.scales;
  nlohmann::json strides = nlohmann::json::array();
  for (const auto& [sy, sx] : cfg.strides) strides.push_back({sy, sx});
  j["strides"] = strides;
  j["channels"] = cfg.channels;
  j["keypoints"] = cfg.keypoints;
  j["supervised_scales"] = cfg.supervised_scales;
  j["variant"] = to_string(cfg.variant);
  j["input_h"] = cfg.input_h;
  j["input_w"] = cfg.input_w;
  return j;
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("network config must be an object");
  reject_unknown_keys(j,
                      {"stages", "scales", "strides", "channels", "keypoints",
                       "supervised_scales", "variant", "input_h", "input_w"},
                      "network config");
  NetworkConfig cfg;
  if (j.contains("stages")) cfg.stages = j.at("stages").get<int>();
  if (j.contains("scales")) cfg.scales = j.at("scales").get<int>();
  if (j.contains("strides")) {
    cfg.strides.clear();
    for (const auto& p : j.at("strides")) {
      if (!p.is_array() || p.size() != 2) {
        throw std::invalid_argument("strides entries must be [sy, sx] pairs");
      }
      cfg.strides.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  if (j.contains("channels")) cfg.channels = j.at("channels").get<std::vector<int>>();
  if (j.contains("keypoints")) cfg.keypoints = j.at("keypoints").get<int>();
  if (j.contains("supervised_scales")) {
    cfg.supervised_scales = j.at("supervised_scales").get<std::vector<int>>();
  }
  if (j.contains("variant")) {
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  }
  if (j.contains("input_h")) cfg.input_h = j.at("input_h").get<int>();
  if (j.contains("input_w")) cfg.input_w = j.at("input_w").get<int>();
  cfg.validate();
  return cfg;
}

}  // namespace msds
