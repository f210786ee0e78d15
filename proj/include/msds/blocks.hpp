#pragma once

#include <random>
#include <string>
#include <vector>

#include "msds/ops.hpp"
#include "msds/params.hpp"

namespace msds {

/// One convolution with optional batch norm, ReLU, and bias. Convolutions
/// followed by batch norm carry no bias of their own.
template <typename S>
struct ConvLayer {
  int w = -1;
  int bias = -1;
  int gamma = -1, beta = -1, rmean = -1, rvar = -1;
  int kernel = 3, stride = 1, pad = 1;
  bool has_bn = true, has_relu = true;

  static ConvLayer create(ParamStore<S>& ps, const std::string& prefix,
                          int in_ch, int out_ch, int kernel, int stride,
                          int pad, bool bn, bool act, std::mt19937_64& rng,
                          double head_std = 0.0) {
    ConvLayer l;
    l.kernel = kernel;
    l.stride = stride;
    l.pad = pad;
    l.has_bn = bn;
    l.has_relu = act;
    Tensor4<S> wt = head_std > 0.0
                        ? small_normal<S>(out_ch, in_ch, kernel, kernel, head_std, rng)
                        : he_normal<S>(out_ch, in_ch, kernel, kernel, rng);
    l.w = ps.add(prefix + ".w", std::move(wt));
    if (bn) {
      l.gamma = ps.add(prefix + ".bn.gamma", Tensor4<S>::constant(1, out_ch, 1, 1, S(1)));
      l.beta = ps.add(prefix + ".bn.beta", Tensor4<S>(1, out_ch, 1, 1));
      l.rmean = ps.add(prefix + ".bn.rmean", Tensor4<S>(1, out_ch, 1, 1), false);
      l.rvar = ps.add(prefix + ".bn.rvar", Tensor4<S>::constant(1, out_ch, 1, 1, S(1)), false);
    } else {
      l.bias = ps.add(prefix + ".b", Tensor4<S>(1, out_ch, 1, 1));
    }
    return l;
  }

  int apply(Graph<S>& g, GraphBinding<S>& bind, ParamStore<S>& ps, int x,
            bool train) const {
    int y = ops::conv2d(g, x, bind.node_for(w),
                        bias >= 0 ? bind.node_for(bias) : -1, stride, stride,
                        pad, pad);
    if (has_bn) {
      y = ops::batch_norm(g, y, bind.node_for(gamma), bind.node_for(beta),
                          &ps.entry(rmean).value, &ps.entry(rvar).value, train);
    }
    if (has_relu) y = ops::relu(g, y);
    return y;
  }
};

/// Stack of 3x3 same-padding conv+bn+relu layers.
template <typename S>
struct ConvBnBlock {
  std::vector<ConvLayer<S>> layers;

  static ConvBnBlock create(ParamStore<S>& ps, const std::string& prefix,
                            int in_ch, int out_ch, int num_layers,
                            std::mt19937_64& rng) {
    ConvBnBlock b;
    int ch = in_ch;
    for (int i = 0; i < num_layers; ++i) {
      b.layers.push_back(ConvLayer<S>::create(
          ps, prefix + ".l" + std::to_string(i), ch, out_ch, 3, 1, 1, true,
          true, rng));
      ch = out_ch;
    }
    return b;
  }

  int apply(Graph<S>& g, GraphBinding<S>& bind, ParamStore<S>& ps, int x,
            bool train) const {
    for (const auto& l : layers) x = l.apply(g, bind, ps, x, train);
    return x;
  }
};

/// Deep-supervision head: conv_Q on the stage features, concatenation with
/// the scale's initial map, then conv_ds ending in a linear K-channel 1x1
/// conv so the output can regress heatmap values.
template <typename S>
struct DsHead {
  ConvLayer<S> conv_q;
  ConvLayer<S> ds_interior;
  ConvLayer<S> ds_final;

  static DsHead create(ParamStore<S>& ps, const std::string& prefix, int ch,
                       int skip_ch, int num_keypoints, std::mt19937_64& rng) {
    DsHead h;
    h.conv_q = ConvLayer<S>::create(ps, prefix + ".conv_q", ch, ch, 3, 1, 1,
                                    true, true, rng);
    h.ds_interior = ConvLayer<S>::create(ps, prefix + ".conv_ds", ch + skip_ch,
                                         ch, 3, 1, 1, true, true, rng);
    h.ds_final = ConvLayer<S>::create(ps, prefix + ".ds_out", ch,
                                      num_keypoints, 1, 1, 0, false, false,
                                      rng, 0.01);
    return h;
  }

  int apply(Graph<S>& g, GraphBinding<S>& bind, ParamStore<S>& ps, int q_id,
            int x0_id, bool train) const {
    const int cq = conv_q.apply(g, bind, ps, q_id, train);
    const int cat = ops::concat_channels(g, std::vector<int>{cq, x0_id});
    const int mid = ds_interior.apply(g, bind, ps, cat, train);
    return ds_final.apply(g, bind, ps, mid, train);
  }
};

template <typename S>
struct GateResult {
  int attention = -1;
  int x_next = -1;
};

/// Spatial attention gate: sigmoid over the channel sum of z, applied to q
/// as a Hadamard product broadcast across channels.
template <typename S>
GateResult<S> attention_gate(Graph<S>& g, int z_id, int q_id) {
  const int summed = ops::sum_channels(g, z_id);
  const int a = ops::sigmoid(g, summed);
  const int xn = ops::broadcast_mul(g, q_id, a);
  return {a, xn};
}

}  // namespace msds
