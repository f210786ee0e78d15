#pragma once

#include <random>
#include <stdexcept>

#include "msds/blocks.hpp"

namespace msds {

/// Parameters of one deep-supervision stage with spatial attention:
/// q = conv_X(x), z = conv_ds([conv_Q(q), x0_skip]),
/// x_next = sigmoid(channel_sum(z)) (.) q.
template <typename S>
struct StageParams {
  ParamStore<S> store;
  ConvBnBlock<S> conv_x;
  DsHead<S> head;
  int in_channels = 0, out_channels = 0, skip_channels = 0, num_keypoints = 0;

  static StageParams create(int in_ch, int out_ch, int skip_ch,
                            int num_keypoints, std::uint64_t seed) {
    require(in_ch >= 1 && out_ch >= 1 && skip_ch >= 1 && num_keypoints >= 1,
            "StageParams: channel counts and keypoints must be >= 1");
    StageParams p;
    p.in_channels = in_ch;
    p.out_channels = out_ch;
    p.skip_channels = skip_ch;
    p.num_keypoints = num_keypoints;
    std::mt19937_64 rng(seed);
    p.conv_x = ConvBnBlock<S>::create(p.store, "conv_x", in_ch, out_ch, 3, rng);
    p.head = DsHead<S>::create(p.store, "head", out_ch, skip_ch, num_keypoints, rng);
    return p;
  }
};

/// Cached forward state of one stage; required by stage_backward.
template <typename S>
struct StageRun {
  Graph<S> graph;
  int x_in = -1, x0_in = -1;
  int q = -1, z = -1, attention = -1, x_next = -1;
  std::vector<std::pair<int, int>> param_nodes;  // (entry index, node id)

  bool valid() const { return x_next >= 0; }

  const Tensor4<S>& q_value() const { return graph.value(q); }
  const Tensor4<S>& z_value() const { return graph.value(z); }
  const Tensor4<S>& attention_value() const { return graph.value(attention); }
  const Tensor4<S>& x_next_value() const { return graph.value(x_next); }
};

template <typename S>
StageRun<S> stage_forward(const Tensor4<S>& x, const Tensor4<S>& x0_skip,
                          StageParams<S>& params, bool train_mode) {
  require(x.batch() == x0_skip.batch() && x.height() == x0_skip.height() &&
              x.width() == x0_skip.width(),
          "stage_forward: x and x0_skip shape mismatch, " + x.shape_string() +
              " vs " + x0_skip.shape_string());
  require(x.channels() == params.in_channels,
          "stage_forward: input channels do not match stage params");
  require(x0_skip.channels() == params.skip_channels,
          "stage_forward: skip channels do not match stage params");

  StageRun<S> run;
  GraphBinding<S> bind(run.graph, params.store);
  run.x_in = run.graph.add_leaf(x, true);
  run.x0_in = run.graph.add_leaf(x0_skip, true);
  run.q = params.conv_x.apply(run.graph, bind, params.store, run.x_in, train_mode);
  run.z = params.head.apply(run.graph, bind, params.store, run.q, run.x0_in,
                            train_mode);
  const GateResult<S> gate = attention_gate(run.graph, run.z, run.q);
  run.attention = gate.attention;
  run.x_next = gate.x_next;
  run.param_nodes = bind.pairs();
  return run;
}

template <typename S>
struct StageGrads {
  Tensor4<S> d_x;
  Tensor4<S> d_x0_skip;
};

/// Reverse-mode gradients through the stage. Upstream gradients arrive for
/// x_next and z; parameter gradients are accumulated into params.store.
template <typename S>
StageGrads<S> stage_backward(StageParams<S>& params, StageRun<S>& run,
                             const Tensor4<S>& grad_x_next,
                             const Tensor4<S>& grad_z) {
  if (!run.valid()) {
    throw std::invalid_argument("stage_backward: missing forward cache");
  }
  run.graph.backward_seeded({{run.x_next, grad_x_next}, {run.z, grad_z}});
  for (const auto& [entry_idx, node_id] : run.param_nodes) {
    if (!run.graph.has_grad(node_id)) continue;
    params.store.entry(entry_idx).grad.array() +=
        run.graph.grad(node_id).array();
  }
  StageGrads<S> out;
  out.d_x = run.graph.grad(run.x_in);
  out.d_x0_skip = run.graph.grad(run.x0_in);
  return out;
}

}  // namespace msds
