#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msds/heatmap.hpp"
#include "msds/tensor.hpp"

namespace msds {

/// Balance weights of the composite loss: total = final MSE +
/// alpha * sum_m beta_m * sum_s gamma_s * ds MSE. Empty beta/gamma mean
/// all-ones.
struct LossWeights {
  double alpha = 0.1;
  std::vector<double> beta;   // per stage, 1-based stage m -> beta[m-1]
  std::vector<double> gamma;  // per scale, 1-based scale s -> gamma[s-1]

  double beta_at(int m) const {
    return beta.empty() ? 1.0 : beta.at(static_cast<size_t>(m - 1));
  }
  double gamma_at(int s) const {
    return gamma.empty() ? 1.0 : gamma.at(static_cast<size_t>(s - 1));
  }
  void validate() const {
    require(alpha >= 0.0, "LossWeights: alpha must be >= 0");
    for (double b : beta) require(b >= 0.0, "LossWeights: beta must be >= 0");
    for (double g : gamma) require(g >= 0.0, "LossWeights: gamma must be >= 0");
  }
};

struct LossBreakdown {
  double total = 0.0;
  double final_term = 0.0;
  std::map<std::pair<int, int>, double> ds_terms;  // (s, m) -> unweighted MSE
};

template <typename S>
double mse(const Tensor4<S>& a, const Tensor4<S>& b) {
  require(a.same_shape(b), "mse: shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
  if (a.size() == 0) return 0.0;
  return (a.array() - b.array()).template cast<double>().square().sum() /
         static_cast<double>(a.size());
}

/// Composite training loss over the final prediction and every deeply
/// supervised output, keyed (scale s, stage m). Labels are provided per
/// scale.
template <typename S>
LossBreakdown composite_loss(
    const Tensor4<S>& final_pred, const Tensor4<S>& final_label,
    const std::map<std::pair<int, int>, Tensor4<S>>& ds_preds,
    const std::map<int, Tensor4<S>>& ds_labels, const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  out.final_term = mse(final_pred, final_label);
  double ds_sum = 0.0;
  for (const auto& [key, pred] : ds_preds) {
    const auto& [s, m] = key;
    auto it = ds_labels.find(s);
    require(it != ds_labels.end(),
            "composite_loss: missing label for supervised scale " + std::to_string(s));
    const double term = mse(pred, it->second);
    out.ds_terms[key] = term;
    ds_sum += w.beta_at(m) * w.gamma_at(s) * term;
  }
  out.total = out.final_term + w.alpha * ds_sum;
  return out;
}

struct MetricsReport {
  std::vector<double> thresholds;
  std::vector<double> pck;
  std::vector<double> mpjpe;  // NaN where no keypoint is correct
  std::vector<long> correct_counts;
};

struct MpjpeResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  long correct_count = 0;
  bool defined() const { return correct_count > 0; }
};

/// PCK at threshold t: fraction of keypoints whose prediction lies strictly
/// within t pixels of ground truth. Keypoints invisible in the label are
/// excluded from numerator and denominator.
double pck(const std::vector<KeypointSet>& preds,
           const std::vector<KeypointSet>& labels, double threshold);

/// Mean position error over the keypoints counted correct at threshold t,
/// reported with that correct count.
MpjpeResult mpjpe(const std::vector<KeypointSet>& preds,
                  const std::vector<KeypointSet>& labels, double threshold);

MetricsReport pck_curve(const std::vector<KeypointSet>& preds,
                        const std::vector<KeypointSet>& labels,
                        const std::vector<double>& thresholds);

/// CSV with header threshold,pck,mpjpe,correct_count; 6 significant digits.
std::string metrics_to_csv(const MetricsReport& report);

}  // namespace msds
