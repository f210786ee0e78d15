#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "msds/config.hpp"
#include "msds/trainer.hpp"

namespace msds {

/// One structured-text file combining the network architecture, the training
/// protocol, and data paths. Unknown keys are rejected at every level.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  std::string data_root;
  std::string out_dir;
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("train config must be an object");
  reject_unknown_keys(j,
                      {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                       "epochs", "batch_size", "alpha", "beta", "gamma", "seed",
                       "checkpoint_every", "val_threshold", "sigma_sq",
                       "grad_clip", "grad_clip_norm"},
                      "train config");
  TrainConfig tc;
  if (j.contains("learning_rate")) tc.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("adam_beta1")) tc.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) tc.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("adam_eps")) tc.adam_eps = j.at("adam_eps").get<double>();
  if (j.contains("epochs")) tc.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) tc.batch_size = j.at("batch_size").get<int>();
  if (j.contains("alpha")) tc.loss_weights.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) tc.loss_weights.beta = j.at("beta").get<std::vector<double>>();
  if (j.contains("gamma")) tc.loss_weights.gamma = j.at("gamma").get<std::vector<double>>();
  if (j.contains("seed")) tc.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("checkpoint_every")) tc.checkpoint_every = j.at("checkpoint_every").get<int>();
  if (j.contains("val_threshold")) tc.val_threshold = j.at("val_threshold").get<double>();
  if (j.contains("sigma_sq")) tc.sigma_sq = j.at("sigma_sq").get<double>();
  if (j.contains("grad_clip")) tc.grad_clip = j.at("grad_clip").get<bool>();
  if (j.contains("grad_clip_norm")) tc.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  tc.validate();
  return tc;
}

inline nlohmann::json to_json(const TrainConfig& tc) {
  nlohmann::json j;
  j["learning_rate"] = tc.learning_rate;
  j["adam_beta1"] = tc.adam_beta1;
  j["adam_beta2"] = tc.adam_beta2;
  j["adam_eps"] = tc.adam_eps;
  j["epochs"] = tc.epochs;
  j["batch_size"] = tc.batch_size;
  j["alpha"] = tc.loss_weights.alpha;
  if (!tc.loss_weights.beta.empty()) j["beta"] = tc.loss_weights.beta;
  if (!tc.loss_weights.gamma.empty()) j["gamma"] = tc.loss_weights.gamma;
  j["seed"] = tc.seed;
  j["checkpoint_every"] = tc.checkpoint_every;
  j["val_threshold"] = tc.val_threshold;
  j["sigma_sq"] = tc.sigma_sq;
  j["grad_clip"] = tc.grad_clip;
  j["grad_clip_norm"] = tc.grad_clip_norm;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("run config must be an object");
  reject_unknown_keys(j, {"network", "train", "data"}, "run config");
  RunConfig rc;
  if (j.contains("network")) rc.network = network_config_from_json(j.at("network"));
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown_keys(d, {"root", "out"}, "data config");
    if (d.contains("root")) rc.data_root = d.at("root").get<std::string>();
    if (d.contains("out")) rc.out_dir = d.at("out").get<std::string>();
  }
  return rc;
}

/// Parses a run-config file; JSON syntax errors are reported with the line
/// number of the offending byte.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                             ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace msds
