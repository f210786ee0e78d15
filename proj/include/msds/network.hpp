#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msds/blocks.hpp"
#include "msds/config.hpp"

namespace msds {

template <typename S>
struct NetworkOutput {
  Tensor4<S> final_heatmap;                            // (B, K, H, W)
  std::map<std::pair<int, int>, Tensor4<S>> ds_outputs;   // (s, m) -> (B, K, Hs, Ws)
  std::map<std::pair<int, int>, Tensor4<S>> attentions;   // (s, m) -> (B, 1, Hs, Ws)
};

/// Multi-scale deep-supervision network. Per stage, a downward pass fuses
/// each scale with a strided projection of the next finer scale, an upward
/// pass fuses with an upsampled projection of the next coarser scale, and a
/// per-scale attention gate forwards features to the next stage.
template <typename S>
class Network {
 public:
  explicit Network(NetworkConfig cfg, std::uint64_t init_seed = 1)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    build(rng);
  }

  struct ForwardPass {
    Graph<S> graph;
    int image_id = -1;
    std::vector<int> pyramid_ids;                       // index s-1, initial scale maps
    int final_id = -1;
    std::map<std::pair<int, int>, int> ds_ids;          // (s, m)
    std::map<std::pair<int, int>, int> attention_ids;   // (s, m)
    std::map<std::pair<int, int>, int> q_ids;           // (s, m) fused stage features
    std::map<std::pair<int, int>, int> gated_ids;       // (s, m) next-stage inputs
    std::vector<std::pair<int, int>> param_nodes;
    bool train_mode = false;

    bool valid() const { return final_id >= 0; }

    NetworkOutput<S> output() const {
      NetworkOutput<S> out;
      out.final_heatmap = graph.value(final_id);
      for (const auto& [key, id] : ds_ids) out.ds_outputs[key] = graph.value(id);
      for (const auto& [key, id] : attention_ids) out.attentions[key] = graph.value(id);
      return out;
    }
  };

  ForwardPass forward(const Tensor4<S>& image, bool train_mode) {
    require(image.channels() == 3, "Network::forward: expected 3-channel input");
    require(image.height() == cfg_.input_h && image.width() == cfg_.input_w,
            "Network::forward: input " + image.shape_string() +
                " does not match configured " + std::to_string(cfg_.input_h) +
                "x" + std::to_string(cfg_.input_w));
    ForwardPass fp;
    fp.train_mode = train_mode;
    GraphBinding<S> bind(fp.graph, params_);
    Graph<S>& g = fp.graph;
    fp.image_id = g.add_leaf(image, false);

    // Scale pyramid and per-scale stems.
    std::vector<int> x0(static_cast<size_t>(cfg_.scales), -1);
    std::vector<int> x(static_cast<size_t>(cfg_.scales), -1);
    for (int s = 1; s <= cfg_.scales; ++s) {
      x0[idx(s)] = pyramid_[idx(s)].apply(g, bind, params_, fp.image_id, train_mode);
      x[idx(s)] = stem_[idx(s)].apply(g, bind, params_, x0[idx(s)], train_mode);
    }
    fp.pyramid_ids = x0;

    const bool has_down = cfg_.variant != Variant::upscale_only;
    const bool has_up = cfg_.variant != Variant::downscale_only;
    const bool gated = cfg_.variant != Variant::no_deep_supervision;

    for (int m = 1; m <= cfg_.stages; ++m) {
      const auto& st = stage_blocks(m);

      // Downward pass: fine to coarse, cascading the fused maps.
      std::vector<int> xt = x;
      if (has_down) {
        for (int s = 2; s <= cfg_.scales; ++s) {
          const int projected = st[idx(s)].down.apply(g, bind, params_, xt[idx(s - 1)], train_mode);
          const int cat = ops::concat_channels(g, std::vector<int>{x[idx(s)], projected});
          xt[idx(s)] = st[idx(s)].fuse_down.apply(g, bind, params_, cat, train_mode);
        }
      }

      // Upward pass: coarse to fine.
      std::vector<int> q(static_cast<size_t>(cfg_.scales), -1);
      for (int s = cfg_.scales; s >= 1; --s) {
        const int qraw = st[idx(s)].conv_x.apply(g, bind, params_, xt[idx(s)], train_mode);
        if (has_up && s < cfg_.scales) {
          const int up = ops::upsample_bilinear(g, q[idx(s + 1)], cfg_.scale_h(s), cfg_.scale_w(s));
          const int projected = st[idx(s)].up.apply(g, bind, params_, up, train_mode);
          const int cat = ops::concat_channels(g, std::vector<int>{qraw, projected});
          q[idx(s)] = st[idx(s)].fuse_up.apply(g, bind, params_, cat, train_mode);
        } else {
          q[idx(s)] = qraw;
        }
      }

      // Deeply supervised attention gate per scale.
      for (int s = 1; s <= cfg_.scales; ++s) {
        fp.q_ids[{s, m}] = q[idx(s)];
        if (!gated) {
          x[idx(s)] = q[idx(s)];
          fp.gated_ids[{s, m}] = q[idx(s)];
          continue;
        }
        const int z = st[idx(s)].head.apply(g, bind, params_, q[idx(s)], x0[idx(s)], train_mode);
        const GateResult<S> gate = attention_gate(g, z, q[idx(s)]);
        x[idx(s)] = gate.x_next;
        fp.gated_ids[{s, m}] = gate.x_next;
        fp.attention_ids[{s, m}] = gate.attention;
        if (cfg_.scale_supervised(s)) fp.ds_ids[{s, m}] = z;
      }
    }

    fp.final_id = final_.apply(g, bind, params_, x[idx(1)], train_mode);
    fp.param_nodes = bind.pairs();
    return fp;
  }

  /// Scale pyramid on its own: the strided projections of the input image.
  std::vector<Tensor4<S>> build_pyramid(const Tensor4<S>& image, bool train_mode) {
    require(image.channels() == 3, "build_pyramid: expected 3-channel input");
    Graph<S> g;
    GraphBinding<S> bind(g, params_);
    const int img = g.add_leaf(image, false);
    std::vector<Tensor4<S>> out;
    for (int s = 1; s <= cfg_.scales; ++s) {
      out.push_back(g.value(pyramid_[idx(s)].apply(g, bind, params_, img, train_mode)));
    }
    return out;
  }

  /// Reverse-mode pass from explicit output gradients; parameter gradients
  /// are accumulated into the store.
  void backward(ForwardPass& fp, const Tensor4<S>& d_final,
                const std::map<std::pair<int, int>, Tensor4<S>>& d_ds = {}) {
    if (!fp.valid()) throw std::invalid_argument("Network::backward: missing forward cache");
    std::vector<std::pair<int, Tensor4<S>>> seeds;
    seeds.emplace_back(fp.final_id, d_final);
    for (const auto& [key, grad] : d_ds) {
      auto it = fp.ds_ids.find(key);
      require(it != fp.ds_ids.end(),
              "Network::backward: gradient for absent ds output s" +
                  std::to_string(key.first) + ",m" + std::to_string(key.second));
      seeds.emplace_back(it->second, grad);
    }
    fp.graph.backward_seeded(seeds);
    writeback_param_grads(fp);
  }

  /// Accumulates graph-side parameter gradients into the store after an
  /// externally driven backward sweep (e.g. through a composed loss node).
  void writeback_param_grads(ForwardPass& fp) {
    for (const auto& [entry_idx, node_id] : fp.param_nodes) {
      if (!fp.graph.has_grad(node_id)) continue;
      params_.entry(entry_idx).grad.array() += fp.graph.grad(node_id).array();
    }
  }

  const NetworkConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  std::int64_t parameter_count() const { return params_.trainable_scalar_count(); }

  /// Scale that owns a parameter (1-based); 1 for the shared final head.
  static int scale_of_param(const std::string& name) {
    if (name.rfind("final.", 0) == 0) return 1;
    if (name.size() > 1 && name[0] == 's') {
      size_t pos = 1;
      int v = 0;
      while (pos < name.size() && name[pos] >= '0' && name[pos] <= '9') {
        v = v * 10 + (name[pos] - '0');
        ++pos;
      }
      if (pos < name.size() && name[pos] == '.' && v >= 1) return v;
    }
    throw std::invalid_argument("scale_of_param: unrecognized name " + name);
  }

 private:
  struct StageBlocks {
    ConvLayer<S> down;       // 3x3 strided projection from scale s-1
    ConvLayer<S> fuse_down;  // 1x1 restoring channels after concat
    ConvBnBlock<S> conv_x;
    ConvLayer<S> up;         // 1x1 projection after bilinear upsample
    ConvLayer<S> fuse_up;
    DsHead<S> head;
  };

  static size_t idx(int s) { return static_cast<size_t>(s - 1); }

  const std::vector<StageBlocks>& stage_blocks(int m) const {
    return stages_[static_cast<size_t>(m - 1)];
  }

  void build(std::mt19937_64& rng) {
    const bool has_down = cfg_.variant != Variant::upscale_only;
    const bool has_up = cfg_.variant != Variant::downscale_only;
    for (int s = 1; s <= cfg_.scales; ++s) {
      const std::string sp = "s" + std::to_string(s);
      const auto& [sy, sx] = cfg_.strides[idx(s)];
      const int ch = cfg_.channels[idx(s)];
      // Stride-1 scale keeps a 3x3 same-padding conv; coarser scales use a
      // kernel equal to the stride (exact H/stride output).
      const int k = (sy == 1 && sx == 1) ? 3 : std::max(sy, sx);
      const int pad = (sy == 1 && sx == 1) ? 1 : 0;
      pyramid_.push_back(ConvLayer<S>::create(params_, sp + ".pyramid", 3, ch,
                                              k, std::max(sy, sx), pad, true, true, rng));
      stem_.push_back(ConvBnBlock<S>::create(params_, sp + ".stem", ch, ch, 3, rng));
    }
    for (int m = 1; m <= cfg_.stages; ++m) {
      std::vector<StageBlocks> blocks;
      for (int s = 1; s <= cfg_.scales; ++s) {
        const std::string sp = "s" + std::to_string(s) + ".stage" + std::to_string(m);
        const int ch = cfg_.channels[idx(s)];
        StageBlocks b;
        if (has_down && s >= 2) {
          const auto [ry, rx] = cfg_.stride_ratio(s);
          b.down = ConvLayer<S>::create(params_, sp + ".down",
                                        cfg_.channels[idx(s - 1)], ch, 3,
                                        std::max(ry, rx), 1, false, false, rng);
          b.fuse_down = ConvLayer<S>::create(params_, sp + ".fuse_down", 2 * ch,
                                             ch, 1, 1, 0, false, false, rng);
        }
        b.conv_x = ConvBnBlock<S>::create(params_, sp + ".conv_x", ch, ch, 3, rng);
        if (has_up && s < cfg_.scales) {
          b.up = ConvLayer<S>::create(params_, sp + ".up",
                                      cfg_.channels[idx(s + 1)], ch, 1, 1, 0,
                                      false, false, rng);
          b.fuse_up = ConvLayer<S>::create(params_, sp + ".fuse_up", 2 * ch, ch,
                                           1, 1, 0, false, false, rng);
        }
        b.head = DsHead<S>::create(params_, sp + ".head", ch, ch, cfg_.keypoints, rng);
        blocks.push_back(std::move(b));
      }
      stages_.push_back(std::move(blocks));
    }
    final_ = ConvLayer<S>::create(params_, "final", cfg_.channels[0],
                                  cfg_.keypoints, 1, 1, 0, false, false, rng, 0.01);
  }

  NetworkConfig cfg_;
  ParamStore<S> params_;
  std::vector<ConvLayer<S>> pyramid_;
  std::vector<ConvBnBlock<S>> stem_;
  std::vector<std::vector<StageBlocks>> stages_;
  ConvLayer<S> final_;
};

inline std::int64_t count_parameters(const NetworkConfig& cfg) {
  cfg.validate();
  return Network<float>(cfg, 0).parameter_count();
}

}  // namespace msds
