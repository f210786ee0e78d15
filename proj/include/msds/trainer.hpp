#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msds/checkpoint.hpp"
#include "msds/dataset.hpp"
#include "msds/metrics.hpp"
#include "msds/network.hpp"
#include "msds/ops.hpp"

namespace msds {

inline constexpr const char* kVersion = "0.1.0";

struct TrainConfig {
  double learning_rate = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 100;
  int batch_size = 8;
  LossWeights loss_weights;
  std::uint64_t seed = 1;
  int checkpoint_every = 10;
  double val_threshold = 5.0;
  double sigma_sq = 3.0;
  bool grad_clip = false;
  double grad_clip_norm = 10.0;

  void validate() const {
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
            "TrainConfig: adam betas must be in [0, 1)");
    require(adam_eps > 0.0, "TrainConfig: adam_eps must be > 0");
    require(sigma_sq > 0.0, "TrainConfig: sigma_sq must be > 0");
    require(val_threshold > 0.0, "TrainConfig: val_threshold must be > 0");
    loss_weights.validate();
  }
};

/// First/second moment buffers per trainable parameter, plus the shared
/// step counter.
template <typename S>
struct AdamState {
  std::vector<Tensor4<S>> m, v;  // indexed by store entry
  std::int64_t step = 0;

  static AdamState init(const ParamStore<S>& store) {
    AdamState st;
    for (int i = 0; i < store.count(); ++i) {
      const auto& e = store.entry(i);
      st.m.emplace_back(e.value.batch(), e.value.channels(), e.value.height(), e.value.width());
      st.v.emplace_back(e.value.batch(), e.value.channels(), e.value.height(), e.value.width());
    }
    return st;
  }
};

/// One bias-corrected Adam update from the gradients currently held in the
/// store. Aborts with the parameter name on non-finite gradients.
template <typename S>
void adam_step(ParamStore<S>& params, AdamState<S>& state, double lr,
               double beta1, double beta2, double eps) {
  require(state.m.size() == static_cast<size_t>(params.count()),
          "adam_step: state does not match parameter store");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (int i = 0; i < params.count(); ++i) {
    auto& e = params.entry(i);
    if (!e.trainable) continue;
    if (!e.grad.all_finite()) {
      throw std::runtime_error("adam_step: non-finite gradient in parameter " + e.name);
    }
    auto& m = state.m[static_cast<size_t>(i)];
    auto& v = state.v[static_cast<size_t>(i)];
    m.array() = static_cast<S>(beta1) * m.array() + static_cast<S>(1.0 - beta1) * e.grad.array();
    v.array() = static_cast<S>(beta2) * v.array() +
                static_cast<S>(1.0 - beta2) * e.grad.array().square();
    e.value.array() -= static_cast<S>(lr) * (m.array() / static_cast<S>(bc1)) /
                       ((v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(eps));
  }
}

struct AttentionStats {
  double mean = 0.0;
  double entropy = 0.0;  // mean binary entropy, nats
};

struct TrainLogEntry {
  int epoch = 0;
  double total_loss = 0.0;
  double final_term = 0.0;
  std::map<std::pair<int, int>, double> ds_terms;  // (s, m) -> unweighted MSE
  double val_pck = 0.0;
  std::map<std::pair<int, int>, AttentionStats> attention;
};

inline std::string sm_key(int s, int m) {
  return "s" + std::to_string(s) + "_m" + std::to_string(m);
}

inline nlohmann::json to_json(const TrainLogEntry& e) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["total_loss"] = e.total_loss;
  j["final_term"] = e.final_term;
  nlohmann::json ds = nlohmann::json::object();
  for (const auto& [key, value] : e.ds_terms) ds[sm_key(key.first, key.second)] = value;
  j["ds_terms"] = ds;
  j["val_pck"] = e.val_pck;
  nlohmann::json att = nlohmann::json::object();
  for (const auto& [key, st] : e.attention) {
    att[sm_key(key.first, key.second)] = {{"mean", st.mean}, {"entropy", st.entropy}};
  }
  j["attention"] = att;
  return j;
}

template <typename S>
KeypointSet decode_batch_item(const Tensor4<S>& heatmaps, int item) {
  Heatmap<S> hm(heatmaps.channels(), heatmaps.height(), heatmaps.width());
  for (int c = 0; c < heatmaps.channels(); ++c) {
    hm.channel(c) = heatmaps.plane(item, c);
  }
  return decode_keypoints(hm);
}

namespace detail {

template <typename S>
AttentionStats attention_stats(const Tensor4<S>& a) {
  AttentionStats st;
  const double n = static_cast<double>(a.size());
  double mean = 0.0, entropy = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double v = static_cast<double>(a.array()[i]);
    mean += v;
    v = std::min(1.0 - 1e-12, std::max(1e-12, v));
    entropy += -(v * std::log(v) + (1.0 - v) * std::log(1.0 - v));
  }
  st.mean = mean / n;
  st.entropy = entropy / n;
  return st;
}

inline ScaleDims supervised_scale_dims(const NetworkConfig& cfg) {
  ScaleDims dims;
  if (cfg.variant == Variant::no_deep_supervision) return dims;
  for (int s : cfg.supervised_scales) {
    dims.push_back({s, {cfg.scale_h(s), cfg.scale_w(s)}});
  }
  return dims;
}

}  // namespace detail

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  double best_val_pck = -1.0;
  int best_epoch = -1;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
  std::filesystem::path manifest_path;
};

/// Composes the Eq.-style loss on a forward pass's graph: final MSE plus
/// alpha-weighted deeply supervised MSEs. Returns the loss node and the
/// per-term values.
template <typename S>
struct ComposedLoss {
  int node = -1;
  double total = 0.0;
  double final_term = 0.0;
  std::map<std::pair<int, int>, double> ds_terms;
};

template <typename S>
ComposedLoss<S> compose_loss(typename Network<S>::ForwardPass& fp,
                             const Tensor4<S>& final_label,
                             const std::map<int, Tensor4<S>>& ds_labels,
                             const LossWeights& w) {
  ComposedLoss<S> out;
  std::vector<int> terms;
  std::vector<double> weights;
  const int lf = ops::mse_loss(fp.graph, fp.final_id, final_label);
  out.final_term = static_cast<double>(fp.graph.value(lf).array()[0]);
  terms.push_back(lf);
  weights.push_back(1.0);
  for (const auto& [key, id] : fp.ds_ids) {
    const auto& [s, m] = key;
    auto it = ds_labels.find(s);
    require(it != ds_labels.end(),
            "compose_loss: missing label for supervised scale " + std::to_string(s));
    const int l = ops::mse_loss(fp.graph, id, it->second);
    out.ds_terms[key] = static_cast<double>(fp.graph.value(l).array()[0]);
    terms.push_back(l);
    weights.push_back(w.alpha * w.beta_at(m) * w.gamma_at(s));
  }
  out.node = ops::weighted_sum(fp.graph, terms, weights);
  out.total = static_cast<double>(fp.graph.value(out.node).array()[0]);
  return out;
}

/// Validation PCK of the current parameters at one threshold (eval mode).
template <typename S>
double validation_pck(Network<S>& net, const std::vector<Batch<S>>& batches,
                      double threshold) {
  std::vector<KeypointSet> preds, labels;
  for (const auto& batch : batches) {
    auto fp = net.forward(batch.images, false);
    const Tensor4<S>& heat = fp.graph.value(fp.final_id);
    for (int i = 0; i < batch.images.batch(); ++i) {
      preds.push_back(decode_batch_item(heat, i));
      labels.push_back(batch.keypoints[static_cast<size_t>(i)]);
    }
  }
  return pck(preds, labels, threshold);
}

/// Full optimization loop: Adam on the composite loss over the train split,
/// per-epoch validation PCK, best-checkpoint persistence, and a structured
/// NDJSON log. Deterministic for a fixed seed.
template <typename S>
TrainResult train(const TrainConfig& tc, const NetworkConfig& nc,
                  const std::filesystem::path& dataset_root,
                  const std::filesystem::path& out_dir,
                  std::ostream* progress = nullptr) {
  tc.validate();
  nc.validate();
  if (!tc.loss_weights.beta.empty() &&
      static_cast<int>(tc.loss_weights.beta.size()) < nc.stages) {
    throw std::invalid_argument("train: beta must list one weight per stage");
  }
  if (!tc.loss_weights.gamma.empty() &&
      static_cast<int>(tc.loss_weights.gamma.size()) < nc.scales) {
    throw std::invalid_argument("train: gamma must list one weight per scale");
  }
  const Dataset ds = load_dataset(dataset_root);
  if (ds.num_keypoints != nc.keypoints) {
    throw std::invalid_argument("train: dataset has " + std::to_string(ds.num_keypoints) +
                                " keypoints but network expects " +
                                std::to_string(nc.keypoints));
  }
  const SplitDataset split = split_dataset(ds.records, SplitRatios{}, tc.seed);

  std::vector<LoadedSample<S>> train_samples, val_samples;
  for (const auto& r : split.train) {
    train_samples.push_back(load_sample<S>(dataset_root, r, nc.input_h, nc.input_w));
  }
  for (const auto& r : split.val) {
    val_samples.push_back(load_sample<S>(dataset_root, r, nc.input_h, nc.input_w));
  }

  const ScaleDims scale_dims = detail::supervised_scale_dims(nc);
  std::vector<size_t> val_order(val_samples.size());
  for (size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;
  const std::vector<Batch<S>> val_batches =
      make_batches(val_samples, val_order, tc.batch_size, tc.sigma_sq, scale_dims);

  std::filesystem::create_directories(out_dir);
  Network<S> net(nc, tc.seed);
  AdamState<S> adam = AdamState<S>::init(net.params());

  TrainResult result;
  result.checkpoint_path = out_dir / "best.ckpt";

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::vector<size_t> order(train_samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(tc.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    const std::vector<Batch<S>> batches =
        make_batches(train_samples, order, tc.batch_size, tc.sigma_sq, scale_dims);

    TrainLogEntry entry;
    entry.epoch = epoch;
    double weight_total = 0.0;
    std::map<std::pair<int, int>, double> att_mean_acc, att_ent_acc;

    for (const auto& batch : batches) {
      const double bw = static_cast<double>(batch.images.batch());
      net.params().zero_grads();
      auto fp = net.forward(batch.images, true);
      const ComposedLoss<S> loss =
          compose_loss<S>(fp, batch.labels, batch.scale_labels, tc.loss_weights);
      if (!(loss.total <= 1e6)) {
        throw DivergenceError("train: loss diverged (" + std::to_string(loss.total) +
                              ") at epoch " + std::to_string(epoch));
      }
      fp.graph.backward(loss.node);
      net.writeback_param_grads(fp);
      if (tc.grad_clip) {
        double sq = 0.0;
        auto& store = net.params();
        for (int i = 0; i < store.count(); ++i) {
          if (!store.entry(i).trainable) continue;
          sq += store.entry(i).grad.array().template cast<double>().square().sum();
        }
        const double norm = std::sqrt(sq);
        if (norm > tc.grad_clip_norm) {
          const S scale = static_cast<S>(tc.grad_clip_norm / norm);
          for (int i = 0; i < store.count(); ++i) {
            if (store.entry(i).trainable) store.entry(i).grad.array() *= scale;
          }
        }
      }
      adam_step(net.params(), adam, tc.learning_rate, tc.adam_beta1, tc.adam_beta2,
                tc.adam_eps);

      entry.total_loss += bw * loss.total;
      entry.final_term += bw * loss.final_term;
      for (const auto& [key, value] : loss.ds_terms) entry.ds_terms[key] += bw * value;
      for (const auto& [key, id] : fp.attention_ids) {
        const AttentionStats st = detail::attention_stats(fp.graph.value(id));
        att_mean_acc[key] += bw * st.mean;
        att_ent_acc[key] += bw * st.entropy;
      }
      weight_total += bw;
    }

    entry.total_loss /= weight_total;
    entry.final_term /= weight_total;
    for (auto& [key, value] : entry.ds_terms) value /= weight_total;
    for (const auto& [key, acc] : att_mean_acc) {
      entry.attention[key] = {acc / weight_total, att_ent_acc[key] / weight_total};
    }
    entry.val_pck = validation_pck(net, val_batches, tc.val_threshold);

    if (entry.val_pck > result.best_val_pck) {
      result.best_val_pck = entry.val_pck;
      result.best_epoch = epoch;
      save_checkpoint(net, result.checkpoint_path);
    }
    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0) {
      save_checkpoint(net, out_dir / "latest.ckpt");
    }
    if (progress) {
      (*progress) << "epoch " << epoch << " total_loss " << entry.total_loss
                  << " final_term " << entry.final_term;
      for (const auto& [key, value] : entry.ds_terms) {
        (*progress) << " " << sm_key(key.first, key.second) << " " << value;
      }
      (*progress) << " val_pck " << entry.val_pck << "\n";
    }
    result.log.push_back(std::move(entry));
  }

  result.log_path = out_dir / "train_log.ndjson";
  {
    std::ofstream f(result.log_path, std::ios::trunc);
    if (!f) throw std::runtime_error("train: cannot write log: " + result.log_path.string());
    for (const auto& e : result.log) f << to_json(e).dump() << "\n";
  }

  result.manifest_path = out_dir / "run_manifest.json";
  {
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["network"] = to_json(nc);
    manifest["seed"] = tc.seed;
    manifest["learning_rate"] = tc.learning_rate;
    manifest["epochs"] = tc.epochs;
    manifest["batch_size"] = tc.batch_size;
    manifest["alpha"] = tc.loss_weights.alpha;
    manifest["sigma_sq"] = tc.sigma_sq;
    manifest["val_threshold"] = tc.val_threshold;
    manifest["dataset_root"] = dataset_root.string();
    std::ofstream f(result.manifest_path, std::ios::trunc);
    if (!f) throw std::runtime_error("train: cannot write manifest");
    f << manifest.dump(2) << "\n";
  }
  return result;
}

enum class EvalSplit { train, val, test, all };

/// Decodes predictions of a trained network over one split and computes the
/// PCK/MPJPE curve.
template <typename S>
MetricsReport evaluate(const std::filesystem::path& checkpoint_path,
                       const std::filesystem::path& dataset_root,
                       const std::vector<double>& thresholds,
                       EvalSplit which = EvalSplit::test, std::uint64_t seed = 1,
                       int batch_size = 8, double sigma_sq = 3.0) {
  Network<S> net = load_checkpoint<S>(checkpoint_path);
  const Dataset ds = load_dataset(dataset_root);
  if (ds.num_keypoints != net.config().keypoints) {
    throw std::invalid_argument("evaluate: dataset has " +
                                std::to_string(ds.num_keypoints) +
                                " keypoints but checkpoint expects " +
                                std::to_string(net.config().keypoints));
  }
  std::vector<DatasetRecord> records;
  if (which == EvalSplit::all) {
    records = ds.records;
  } else {
    const SplitDataset split = split_dataset(ds.records, SplitRatios{}, seed);
    records = which == EvalSplit::train ? split.train
              : which == EvalSplit::val ? split.val
                                        : split.test;
  }
  if (records.empty()) {
    throw std::runtime_error("evaluate: selected split is empty");
  }

  const NetworkConfig& nc = net.config();
  std::vector<LoadedSample<S>> samples;
  for (const auto& r : records) {
    samples.push_back(load_sample<S>(dataset_root, r, nc.input_h, nc.input_w));
  }
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batches = make_batches(samples, order, batch_size, sigma_sq, {});

  std::vector<KeypointSet> preds, labels;
  for (const auto& batch : batches) {
    auto fp = net.forward(batch.images, false);
    const Tensor4<S>& heat = fp.graph.value(fp.final_id);
    for (int i = 0; i < batch.images.batch(); ++i) {
      preds.push_back(decode_batch_item(heat, i));
      labels.push_back(batch.keypoints[static_cast<size_t>(i)]);
    }
  }
  return pck_curve(preds, labels, thresholds);
}

}  // namespace msds
