#include <doctest.h>

#include "msds/stage.hpp"
#include "test_util.hpp"

using namespace msds;
using msds::testing::randn;

TEST_CASE("zero z gives uniform 0.5 attention and halves q") {
  // Compose the gate directly with a forced z = 0.
  std::mt19937_64 rng(21);
  auto q = randn(1, 4, 6, 6, rng);
  Graph<double> g;
  const int qid = g.add_leaf(q, false);
  const int zid = g.add_leaf(Tensor4<double>(1, 2, 6, 6), false);
  const GateResult<double> gate = attention_gate(g, zid, qid);
  CHECK((g.value(gate.attention).array() - 0.5).abs().maxCoeff() < 1e-15);
  CHECK((g.value(gate.x_next).array() - 0.5 * q.array()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("large positive z saturates the gate to identity") {
  std::mt19937_64 rng(22);
  auto q = randn(1, 4, 6, 6, rng);
  Graph<double> g;
  const int qid = g.add_leaf(q, false);
  const int zid = g.add_leaf(Tensor4<double>::constant(1, 2, 6, 6, 50.0), false);
  const GateResult<double> gate = attention_gate(g, zid, qid);
  CHECK((g.value(gate.x_next).array() - q.array()).abs().maxCoeff() < 1e-6);
}

TEST_CASE("stage output recomposes from its own intermediates") {
  std::mt19937_64 rng(23);
  auto x = randn(1, 4, 8, 8, rng);
  auto x0 = randn(1, 4, 8, 8, rng);
  auto params = StageParams<double>::create(4, 4, 4, 2, 5);
  auto run = stage_forward(x, x0, params, true);

  const Tensor4<double>& q = run.q_value();
  const Tensor4<double>& z = run.z_value();
  const Tensor4<double>& xn = run.x_next_value();
  CHECK(xn.same_shape(q));
  CHECK(z.channels() == 2);
  // independent recomposition: sigmoid(channel sum of z) per pixel times q
  for (int y = 0; y < 8; ++y) {
    for (int xx = 0; xx < 8; ++xx) {
      double s = 0.0;
      for (int c = 0; c < z.channels(); ++c) s += z(0, c, y, xx);
      const double a = 1.0 / (1.0 + std::exp(-s));
      CHECK(run.attention_value()(0, 0, y, xx) == doctest::Approx(a).epsilon(1e-12));
      for (int c = 0; c < q.channels(); ++c) {
        CHECK(xn(0, c, y, xx) == doctest::Approx(a * q(0, c, y, xx)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("attention values lie strictly inside (0,1) on random inputs") {
  std::mt19937_64 rng(24);
  auto params = StageParams<double>::create(3, 4, 3, 2, 17);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = randn(2, 3, 6, 6, rng);
    auto x0 = randn(2, 3, 6, 6, rng);
    auto run = stage_forward(x, x0, params, true);
    const auto& a = run.attention_value();
    CHECK(a.array().minCoeff() > 0.0);
    CHECK(a.array().maxCoeff() < 1.0);
  }
}

TEST_CASE("stage preserves spatial dims (same padding contract)") {
  std::mt19937_64 rng(25);
  auto x = randn(2, 3, 10, 14, rng);
  auto x0 = randn(2, 3, 10, 14, rng);
  auto params = StageParams<double>::create(3, 5, 3, 4, 9);
  auto run = stage_forward(x, x0, params, false);
  CHECK(run.q_value().height() == 10);
  CHECK(run.q_value().width() == 14);
  CHECK(run.z_value().height() == 10);
  CHECK(run.x_next_value().width() == 14);
}

TEST_CASE("stage rejects shape and channel mismatches") {
  std::mt19937_64 rng(26);
  auto params = StageParams<double>::create(3, 4, 3, 2, 1);
  auto x = randn(1, 3, 6, 6, rng);
  CHECK_THROWS(stage_forward(x, randn(1, 3, 5, 6, rng), params, true));
  CHECK_THROWS(stage_forward(x, randn(2, 3, 6, 6, rng), params, true));
  CHECK_THROWS(stage_forward(randn(1, 2, 6, 6, rng), randn(1, 3, 6, 6, rng), params, true));
  CHECK_THROWS(stage_forward(x, randn(1, 4, 6, 6, rng), params, true));
}

TEST_CASE("gating monotonicity for nonnegative q") {
  std::mt19937_64 rng(27);
  auto q = msds::testing::randu<double>(1, 3, 5, 5, rng, 0.0, 2.0);
  auto z1 = randn(1, 2, 5, 5, rng);
  Tensor4<double> z2 = z1;
  z2.array() += 0.5;  // larger z -> larger attention
  Graph<double> g;
  const int qid = g.add_leaf(q, false);
  const auto g1 = attention_gate(g, g.add_leaf(z1, false), qid);
  const auto g2 = attention_gate(g, g.add_leaf(z2, false), qid);
  CHECK((g.value(g2.x_next).array() - g.value(g1.x_next).array()).minCoeff() >= 0.0);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
  std::mt19937_64 rng(28);
  auto params = StageParams<double>::create(3, 4, 3, 2, 31);
  auto x = randn(1, 3, 6, 6, rng);
  auto x0 = randn(1, 3, 6, 6, rng);
  params.store.zero_grads();
  auto run = stage_forward(x, x0, params, true);
  auto grads = stage_backward(params, run, Tensor4<double>(1, 4, 6, 6),
                              Tensor4<double>(1, 2, 6, 6));
  for (int i = 0; i < params.store.count(); ++i) {
    CHECK(params.store.entry(i).grad.array().abs().maxCoeff() == 0.0);
  }
  CHECK(grads.d_x.array().abs().maxCoeff() == 0.0);
}

TEST_CASE("stage_backward matches finite differences on parameters") {
  std::mt19937_64 rng(29);
  auto x = randn(1, 3, 6, 6, rng);
  auto x0 = randn(1, 2, 6, 6, rng);
  auto params = StageParams<double>::create(3, 4, 2, 2, 7);
  auto gx = randn(1, 4, 6, 6, rng);
  auto gz = randn(1, 2, 6, 6, rng);

  params.store.zero_grads();
  auto run = stage_forward(x, x0, params, true);
  auto grads = stage_backward(params, run, gx, gz);

  const auto eval = [&]() {
    auto r = stage_forward(x, x0, params, true);
    return (r.x_next_value().array() * gx.array()).sum() +
           (r.z_value().array() * gz.array()).sum();
  };
  const double eps = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < 40; ++s) {
    const int pi = std::uniform_int_distribution<int>(0, params.store.count() - 1)(rng);
    auto& e = params.store.entry(pi);
    if (!e.trainable) continue;
    const int idx = std::uniform_int_distribution<int>(
        0, static_cast<int>(e.value.size()) - 1)(rng);
    const double orig = e.value.array()[idx];
    e.value.array()[idx] = orig + eps;
    const double lp = eval();
    e.value.array()[idx] = orig - eps;
    const double lm = eval();
    e.value.array()[idx] = orig;
    const double fd = (lp - lm) / (2 * eps);
    const double a = e.grad.array()[idx];
    worst = std::max(worst, std::abs(a - fd) /
                                std::max({std::abs(a), std::abs(fd), 1e-6}));
  }
  CHECK(worst < 1e-4);

  // input gradients against finite differences
  for (auto* t : {&x, &x0}) {
    for (int s = 0; s < 15; ++s) {
      const int idx = std::uniform_int_distribution<int>(
          0, static_cast<int>(t->size()) - 1)(rng);
      const double orig = t->array()[idx];
      t->array()[idx] = orig + eps;
      const double lp = eval();
      t->array()[idx] = orig - eps;
      const double lm = eval();
      t->array()[idx] = orig;
      const double fd = (lp - lm) / (2 * eps);
      const double a = (t == &x ? grads.d_x : grads.d_x0_skip).array()[idx];
      CHECK(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}) < 1e-4);
    }
  }
}

TEST_CASE("saturated attention passes gradients through unchanged") {
  std::mt19937_64 rng(30);
  auto q = randn(1, 3, 5, 5, rng);
  Graph<double> g;
  const int qid = g.add_leaf(q, true);
  const int zid = g.add_leaf(Tensor4<double>::constant(1, 2, 5, 5, 60.0), false);
  const GateResult<double> gate = attention_gate(g, zid, qid);
  auto seed = randn(1, 3, 5, 5, rng);
  g.backward_seeded({{gate.x_next, seed}});
  CHECK((g.grad(qid).array() - seed.array()).abs().maxCoeff() < 1e-5);
}

TEST_CASE("stage_backward without forward cache is rejected") {
  auto params = StageParams<double>::create(3, 4, 3, 2, 1);
  StageRun<double> empty;
  CHECK_THROWS(stage_backward(params, empty, Tensor4<double>(1, 4, 6, 6),
                              Tensor4<double>(1, 2, 6, 6)));
}
