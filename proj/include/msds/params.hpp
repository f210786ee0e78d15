#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msds/graph.hpp"
#include "msds/tensor.hpp"

namespace msds {

/// Named tensor registry owning parameter values and their gradients.
/// Entry order is creation order and defines the (deterministic) iteration
/// order used by the optimizer, the checkpoint writer, and weight init.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor4<S> value;
    Tensor4<S> grad;
    bool trainable = true;
  };

  int add(std::string name, Tensor4<S> init, bool trainable = true) {
    if (index_.count(name)) {
      throw std::invalid_argument("ParamStore: duplicate name " + name);
    }
    Entry e;
    e.name = std::move(name);
    e.grad = Tensor4<S>(init.batch(), init.channels(), init.height(), init.width());
    e.value = std::move(init);
    e.trainable = trainable;
    index_.emplace(e.name, static_cast<int>(entries_.size()));
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  Entry& entry(int i) { return entries_.at(static_cast<size_t>(i)); }
  const Entry& entry(int i) const { return entries_.at(static_cast<size_t>(i)); }

  int count() const { return static_cast<int>(entries_.size()); }

  void zero_grads() {
    for (auto& e : entries_) e.grad.array().setZero();
  }

  std::int64_t trainable_scalar_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) {
      if (e.trainable) n += e.value.size();
    }
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Binds store entries to graph leaves for one forward pass. Leaves are
/// created on first use; writeback() accumulates graph gradients into the
/// store after a backward sweep.
template <typename S>
class GraphBinding {
 public:
  GraphBinding(Graph<S>& g, ParamStore<S>& store) : g_(&g), store_(&store) {}

  int node_for(int entry_idx) {
    auto it = node_of_.find(entry_idx);
    if (it != node_of_.end()) return it->second;
    auto& e = store_->entry(entry_idx);
    const int id = g_->add_leaf(e.value, e.trainable);
    node_of_.emplace(entry_idx, id);
    pairs_.push_back({entry_idx, id});
    return id;
  }

  void writeback() {
    for (const auto& [entry_idx, node_id] : pairs_) {
      if (!g_->has_grad(node_id)) continue;
      store_->entry(entry_idx).grad.array() += g_->grad(node_id).array();
    }
  }

  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

 private:
  Graph<S>* g_;
  ParamStore<S>* store_;
  std::unordered_map<int, int> node_of_;
  std::vector<std::pair<int, int>> pairs_;
};

template <typename S>
Tensor4<S> he_normal(int cout, int cin, int kh, int kw, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(cin) * kh * kw;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor4<S> t(cout, cin, kh, kw);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    t.array()[i] = static_cast<S>(dist(rng));
  }
  return t;
}

template <typename S>
Tensor4<S> small_normal(int cout, int cin, int kh, int kw, double std_dev,
                        std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std_dev);
  Tensor4<S> t(cout, cin, kh, kw);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    t.array()[i] = static_cast<S>(dist(rng));
  }
  return t;
}

}  // namespace msds
