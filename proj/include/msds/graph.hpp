#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msds/tensor.hpp"

namespace msds {

/// Reverse-mode tape over Tensor4 values. Nodes are appended in evaluation
/// order, so walking the tape backwards visits every node after all of its
/// consumers. Gradients are allocated lazily; a node whose gradient was never
/// touched is skipped during the backward sweep.
template <typename S>
class Graph {
 public:
  using NodeId = int;

  NodeId add_leaf(Tensor4<S> value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), Tensor4<S>{}, nullptr, needs_grad, false});
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  /// Appends a computed node. `backprop` reads this node's gradient and
  /// accumulates into its parents via accumulate_grad().
  NodeId add_node(Tensor4<S> value, bool needs_grad,
                  std::function<void(Graph&, NodeId)> backprop) {
    nodes_.push_back(
        Node{std::move(value), Tensor4<S>{}, std::move(backprop), needs_grad, false});
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  const Tensor4<S>& value(NodeId id) const { return nodes_[check(id)].value; }

  bool needs_grad(NodeId id) const { return nodes_[check(id)].needs_grad; }

  bool has_grad(NodeId id) const { return nodes_[check(id)].grad_live; }

  /// Gradient of a node; zero tensor if backward never reached it.
  const Tensor4<S>& grad(NodeId id) {
    Node& n = nodes_[check(id)];
    if (!n.grad_live) {
      n.grad = Tensor4<S>(n.value.batch(), n.value.channels(), n.value.height(),
                          n.value.width());
      n.grad_live = true;
    }
    return n.grad;
  }

  void accumulate_grad(NodeId id, const Tensor4<S>& delta) {
    Node& n = nodes_[check(id)];
    if (!n.needs_grad) return;
    if (!n.grad_live) {
      n.grad = delta;
      n.grad_live = true;
    } else {
      n.grad.array() += delta.array();
    }
  }

  /// Backward from a scalar node with seed gradient 1.
  void backward(NodeId root) {
    const Tensor4<S>& v = nodes_[check(root)].value;
    require(v.size() == 1, "Graph::backward: root must be scalar-shaped");
    backward_seeded({{root, Tensor4<S>::scalar(S(1))}});
  }

  /// Backward from explicit upstream gradients (node, seed) pairs.
  void backward_seeded(
      const std::vector<std::pair<NodeId, Tensor4<S>>>& seeds) {
    NodeId top = -1;
    for (const auto& [id, seed] : seeds) {
      require(nodes_[check(id)].value.same_shape(seed),
              "Graph::backward_seeded: seed shape mismatch");
      accumulate_grad_force(id, seed);
      if (id > top) top = id;
    }
    for (NodeId id = top; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.grad_live && n.backprop) n.backprop(*this, id);
    }
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor4<S> value;
    Tensor4<S> grad;
    std::function<void(Graph&, NodeId)> backprop;
    bool needs_grad = false;
    bool grad_live = false;
  };

  // Seeds may target nodes that do not require gradients (e.g. probing an
  // intermediate); force the accumulation so the sweep still runs.
  void accumulate_grad_force(NodeId id, const Tensor4<S>& delta) {
    Node& n = nodes_[check(id)];
    if (!n.grad_live) {
      n.grad = delta;
      n.grad_live = true;
    } else {
      n.grad.array() += delta.array();
    }
  }

  size_t check(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
      throw std::out_of_range("Graph: bad node id");
    }
    return static_cast<size_t>(id);
  }

  std::vector<Node> nodes_;
};

}  // namespace msds
