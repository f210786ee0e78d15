#include <doctest.h>

#include <cmath>
#include <random>

#include "msds/metrics.hpp"
#include "test_util.hpp"

using namespace msds;
using msds::testing::randn;

namespace {

KeypointSet kp_set(std::initializer_list<std::pair<double, double>> pts) {
  KeypointSet out;
  out.image_width = 1000;
  out.image_height = 1000;
  for (auto [x, y] : pts) out.points.push_back({x, y, true});
  return out;
}

struct RandomPairs {
  std::vector<KeypointSet> preds, labels;
};

RandomPairs random_pairs(int items, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 100.0);
  std::uniform_real_distribution<double> jitter(-15.0, 15.0);
  std::bernoulli_distribution vis(0.9);
  RandomPairs out;
  for (int i = 0; i < items; ++i) {
    KeypointSet lbl, prd;
    lbl.image_width = prd.image_width = 128;
    lbl.image_height = prd.image_height = 128;
    for (int j = 0; j < k; ++j) {
      const double x = pos(rng), y = pos(rng);
      lbl.points.push_back({x, y, vis(rng)});
      prd.points.push_back({x + jitter(rng), y + jitter(rng), true});
    }
    out.labels.push_back(lbl);
    out.preds.push_back(prd);
  }
  return out;
}

}  // namespace

TEST_CASE("pck is 1 for perfect predictions") {
  const auto a = kp_set({{1, 2}, {3, 4}});
  CHECK(pck({a}, {a}, 0.001) == 1.0);
  CHECK(pck({a}, {a}, 10.0) == 1.0);
}

TEST_CASE("pck boundary uses strict inequality") {
  const auto lbl = kp_set({{0, 0}});
  const auto prd = kp_set({{3, 4}});  // error exactly 5
  CHECK(pck({prd}, {lbl}, 5.0) == 0.0);
  CHECK(pck({prd}, {lbl}, 5.01) == 1.0);
}

TEST_CASE("pck and mpjpe match a brute-force recount on random pairs") {
  std::mt19937_64 rng(55);
  const auto pairs = random_pairs(20, 21, rng);
  for (double t : {5.0, 10.0, 20.0}) {
    long correct = 0, total = 0;
    double err_sum = 0.0;
    for (size_t i = 0; i < pairs.labels.size(); ++i) {
      for (size_t j = 0; j < pairs.labels[i].points.size(); ++j) {
        if (!pairs.labels[i].points[j].visible) continue;
        ++total;
        const double dx = pairs.preds[i].points[j].x - pairs.labels[i].points[j].x;
        const double dy = pairs.preds[i].points[j].y - pairs.labels[i].points[j].y;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < t) {
          ++correct;
          err_sum += d;
        }
      }
    }
    CHECK(pck(pairs.preds, pairs.labels, t) ==
          doctest::Approx(static_cast<double>(correct) / total).epsilon(1e-15));
    const MpjpeResult m = mpjpe(pairs.preds, pairs.labels, t);
    CHECK(m.correct_count == correct);
    if (correct > 0) {
      CHECK(m.value == doctest::Approx(err_sum / correct).epsilon(1e-12));
      CHECK(m.value < t);
    }
  }
}

TEST_CASE("mpjpe averages only over correct keypoints") {
  const auto lbl = kp_set({{0, 0}, {100, 100}});
  SUBCASE("both correct") {
    const auto prd = kp_set({{3, 0}, {100, 96}});  // errors 3 and 4
    const MpjpeResult m = mpjpe({prd}, {lbl}, 10.0);
    CHECK(m.correct_count == 2);
    CHECK(m.value == doctest::Approx(3.5));
  }
  SUBCASE("one outlier excluded") {
    const auto prd = kp_set({{3, 0}, {140, 100}});  // errors 3 and 40
    const MpjpeResult m = mpjpe({prd}, {lbl}, 10.0);
    CHECK(m.correct_count == 1);
    CHECK(m.value == doctest::Approx(3.0));
  }
  SUBCASE("none correct is flagged undefined") {
    const auto prd = kp_set({{50, 0}, {140, 100}});
    const MpjpeResult m = mpjpe({prd}, {lbl}, 10.0);
    CHECK(m.correct_count == 0);
    CHECK_FALSE(m.defined());
    CHECK(std::isnan(m.value));
  }
}

TEST_CASE("invisible label keypoints are excluded from both sides") {
  KeypointSet lbl = kp_set({{0, 0}, {10, 10}});
  lbl.points[1].visible = false;
  const auto prd = kp_set({{0, 0}, {500, 500}});
  CHECK(pck({prd}, {lbl}, 5.0) == 1.0);
  CHECK(mpjpe({prd}, {lbl}, 5.0).correct_count == 1);
}

TEST_CASE("pck_curve is monotone and matches per-threshold recomputation") {
  std::mt19937_64 rng(56);
  const auto pairs = random_pairs(15, 7, rng);
  std::vector<double> thresholds;
  for (int t = 1; t <= 20; ++t) thresholds.push_back(t);
  const MetricsReport report = pck_curve(pairs.preds, pairs.labels, thresholds);
  for (size_t i = 0; i < thresholds.size(); ++i) {
    CHECK(report.pck[i] == pck(pairs.preds, pairs.labels, thresholds[i]));
    CHECK(report.correct_counts[i] ==
          mpjpe(pairs.preds, pairs.labels, thresholds[i]).correct_count);
    if (i > 0) {
      CHECK(report.pck[i] >= report.pck[i - 1]);
      CHECK(report.correct_counts[i] >= report.correct_counts[i - 1]);
    }
    if (report.correct_counts[i] > 0) CHECK(report.mpjpe[i] < thresholds[i]);
  }
}

TEST_CASE("pck_curve step location for a single off-by-5 keypoint") {
  const auto lbl = kp_set({{0, 0}});
  const auto prd = kp_set({{0, 5}});
  const MetricsReport r = pck_curve({prd}, {lbl}, {4.0, 5.0, 5.5, 6.0});
  CHECK(r.pck[0] == 0.0);
  CHECK(r.pck[1] == 0.0);  // strict inequality at exactly 5
  CHECK(r.pck[2] == 1.0);
  CHECK(r.pck[3] == 1.0);
}

TEST_CASE("pck_curve rejects bad threshold lists") {
  const auto a = kp_set({{1, 1}});
  CHECK_THROWS(pck_curve({a}, {a}, {}));
  CHECK_THROWS(pck_curve({a}, {a}, {5.0, 5.0}));
  CHECK_THROWS(pck_curve({a}, {a}, {5.0, 4.0}));
}

TEST_CASE("metrics reject misaligned inputs") {
  const auto a = kp_set({{1, 1}});
  const auto b = kp_set({{1, 1}, {2, 2}});
  CHECK_THROWS(pck({a}, {a, b}, 5.0));
  CHECK_THROWS(pck({a}, {b}, 5.0));
}

TEST_CASE("metrics CSV has the pinned schema and 6 significant digits") {
  MetricsReport r;
  r.thresholds = {5.0, 10.0};
  r.pck = {0.123456789, 1.0};
  r.mpjpe = {1.23456789, 2.0};
  r.correct_counts = {3, 6};
  const std::string csv = metrics_to_csv(r);
  CHECK(csv == "threshold,pck,mpjpe,correct_count\n5,0.123457,1.23457,3\n10,1,2,6\n");
}

TEST_CASE("composite_loss equals the direct weighted arithmetic") {
  // final MSE 0.5 and summed ds MSE 2.0 with alpha 0.1 -> 0.7
  Tensor4<double> fp(1, 1, 1, 2), fl(1, 1, 1, 2);
  fp.array()[0] = 1.0;  // (1-0)^2 and (0-0)^2 -> mean 0.5
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  Tensor4<double> dp(1, 1, 1, 1), dl(1, 1, 1, 1);
  dp.array()[0] = 1.0;  // MSE 1.0 each
  ds_preds[{1, 1}] = dp;
  ds_preds[{1, 2}] = dp;
  ds_labels[1] = dl;
  LossWeights w;
  w.alpha = 0.1;
  const LossBreakdown out = composite_loss(fp, fl, ds_preds, ds_labels, w);
  CHECK(out.final_term == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out.total == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("composite_loss with alpha 0 equals the final term exactly") {
  std::mt19937_64 rng(57);
  auto fp = randn(2, 3, 4, 4, rng);
  auto fl = randn(2, 3, 4, 4, rng);
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  ds_preds[{2, 1}] = randn(2, 3, 2, 2, rng);
  ds_labels[2] = randn(2, 3, 2, 2, rng);
  LossWeights w;
  w.alpha = 0.0;
  const LossBreakdown out = composite_loss(fp, fl, ds_preds, ds_labels, w);
  CHECK(out.total == out.final_term);
}

TEST_CASE("composite_loss matches a scalar elementwise recomputation") {
  std::mt19937_64 rng(58);
  auto fp = randn(2, 2, 3, 3, rng);
  auto fl = randn(2, 2, 3, 3, rng);
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  for (int s : {1, 2}) {
    ds_labels[s] = randn(2, 2, 2, 2, rng);
    for (int m : {1, 2}) ds_preds[{s, m}] = randn(2, 2, 2, 2, rng);
  }
  LossWeights w;
  w.alpha = 0.1;
  w.beta = {1.0, 0.5};
  w.gamma = {2.0, 1.0};

  const auto scalar_mse = [](const Tensor4<double>& a, const Tensor4<double>& b) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double d = a.array()[i] - b.array()[i];
      sum += d * d;
    }
    return sum / static_cast<double>(a.size());
  };
  double expected = scalar_mse(fp, fl);
  for (const auto& [key, pred] : ds_preds) {
    expected += w.alpha * w.beta[static_cast<size_t>(key.second - 1)] *
                w.gamma[static_cast<size_t>(key.first - 1)] *
                scalar_mse(pred, ds_labels.at(key.first));
  }
  const LossBreakdown out = composite_loss(fp, fl, ds_preds, ds_labels, w);
  CHECK(out.total == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("composite_loss is affine in alpha") {
  std::mt19937_64 rng(59);
  auto fp = randn(1, 2, 3, 3, rng);
  auto fl = randn(1, 2, 3, 3, rng);
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  ds_preds[{1, 1}] = randn(1, 2, 3, 3, rng);
  ds_preds[{1, 2}] = randn(1, 2, 3, 3, rng);
  ds_labels[1] = randn(1, 2, 3, 3, rng);
  LossWeights w;
  double slope = 0.0;
  for (const auto& [key, pred] : ds_preds) slope += mse(pred, ds_labels.at(1));
  for (double alpha : {0.0, 0.1, 0.5, 2.0}) {
    w.alpha = alpha;
    const LossBreakdown out = composite_loss(fp, fl, ds_preds, ds_labels, w);
    CHECK(out.total ==
          doctest::Approx(out.final_term + alpha * slope).epsilon(1e-12));
  }
}

TEST_CASE("composite_loss rejects shape mismatch and missing labels") {
  Tensor4<double> fp(1, 1, 2, 2), fl(1, 1, 2, 2);
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  ds_preds[{1, 1}] = Tensor4<double>(1, 1, 2, 2);
  CHECK_THROWS(composite_loss(fp, fl, ds_preds, ds_labels, LossWeights{}));
  ds_labels[1] = Tensor4<double>(1, 1, 3, 3);
  CHECK_THROWS(composite_loss(fp, fl, ds_preds, ds_labels, LossWeights{}));
  CHECK_THROWS(composite_loss(fp, Tensor4<double>(1, 1, 3, 3), {}, {}, LossWeights{}));
}

TEST_CASE("composite_loss is zero iff every pair is identical") {
  std::mt19937_64 rng(60);
  auto fp = randn(1, 1, 3, 3, rng);
  std::map<std::pair<int, int>, Tensor4<double>> ds_preds;
  std::map<int, Tensor4<double>> ds_labels;
  ds_preds[{1, 1}] = randn(1, 1, 3, 3, rng);
  ds_labels[1] = ds_preds[{1, 1}];
  LossWeights w;
  CHECK(composite_loss(fp, fp, ds_preds, ds_labels, w).total == 0.0);
  Tensor4<double> other = fp;
  other.array()[0] += 1e-3;
  CHECK(composite_loss(fp, other, ds_preds, ds_labels, w).total > 0.0);
}
