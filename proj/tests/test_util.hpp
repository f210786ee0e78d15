#pragma once

#include <random>
#include <vector>

#include "msds/graph.hpp"
#include "msds/tensor.hpp"

namespace msds::testing {

inline Tensor4<double> randn(int n, int c, int h, int w, std::mt19937_64& rng,
                             double std_dev = 1.0) {
  std::normal_distribution<double> d(0.0, std_dev);
  Tensor4<double> t(n, c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.array()[i] = d(rng);
  return t;
}

template <typename S>
Tensor4<S> randu(int n, int c, int h, int w, std::mt19937_64& rng, double lo,
                 double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor4<S> t(n, c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.array()[i] = static_cast<S>(d(rng));
  return t;
}

/// Central-difference gradient check of a scalar-valued graph builder.
/// `build(graph, leaf_ids)` must return the loss node. Returns the worst
/// relative error over `samples` randomly probed input coordinates.
template <typename BuildFn>
double fd_check(std::vector<Tensor4<double>*> inputs, BuildFn build, int samples,
                std::mt19937_64& rng, double eps = 1e-5) {
  Graph<double> g;
  std::vector<int> ids;
  for (auto* t : inputs) ids.push_back(g.add_leaf(*t, true));
  const int loss = build(g, ids);
  g.backward(loss);
  std::vector<Tensor4<double>> analytic;
  for (int id : ids) analytic.push_back(g.grad(id));

  const auto eval = [&]() {
    Graph<double> g2;
    std::vector<int> ids2;
    for (auto* t : inputs) ids2.push_back(g2.add_leaf(*t, false));
    return g2.value(build(g2, ids2)).array()[0];
  };

  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const int which = std::uniform_int_distribution<int>(
        0, static_cast<int>(inputs.size()) - 1)(rng);
    auto& t = *inputs[static_cast<size_t>(which)];
    const int idx = std::uniform_int_distribution<int>(
        0, static_cast<int>(t.size()) - 1)(rng);
    const double orig = t.array()[idx];
    t.array()[idx] = orig + eps;
    const double lp = eval();
    t.array()[idx] = orig - eps;
    const double lm = eval();
    t.array()[idx] = orig;
    const double fd = (lp - lm) / (2.0 * eps);
    const double a = analytic[static_cast<size_t>(which)].array()[idx];
    const double rel =
        std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace msds::testing
