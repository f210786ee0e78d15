#include "msds/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace msds {

namespace {

void check_aligned(const std::vector<KeypointSet>& preds,
                   const std::vector<KeypointSet>& labels) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("metrics: prediction/label count mismatch (" +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(labels.size()) + ")");
  }
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].count() != labels[i].count()) {
      throw std::invalid_argument("metrics: keypoint count mismatch at item " +
                                  std::to_string(i));
    }
  }
}

double distance(const Keypoint& a, const Keypoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double pck(const std::vector<KeypointSet>& preds,
           const std::vector<KeypointSet>& labels, double threshold) {
  check_aligned(preds, labels);
  long correct = 0, total = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    for (int k = 0; k < labels[i].count(); ++k) {
      const Keypoint& truth = labels[i].points[static_cast<size_t>(k)];
      if (!truth.visible) continue;
      ++total;
      if (distance(preds[i].points[static_cast<size_t>(k)], truth) < threshold) {
        ++correct;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

MpjpeResult mpjpe(const std::vector<KeypointSet>& preds,
                  const std::vector<KeypointSet>& labels, double threshold) {
  check_aligned(preds, labels);
  MpjpeResult out;
  double sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    for (int k = 0; k < labels[i].count(); ++k) {
      const Keypoint& truth = labels[i].points[static_cast<size_t>(k)];
      if (!truth.visible) continue;
      const double d = distance(preds[i].points[static_cast<size_t>(k)], truth);
      if (d < threshold) {
        sum += d;
        ++out.correct_count;
      }
    }
  }
  if (out.correct_count > 0) sum /= static_cast<double>(out.correct_count);
  out.value = out.correct_count > 0 ? sum : std::numeric_limits<double>::quiet_NaN();
  return out;
}

MetricsReport pck_curve(const std::vector<KeypointSet>& preds,
                        const std::vector<KeypointSet>& labels,
                        const std::vector<double>& thresholds) {
  if (thresholds.empty()) {
    throw std::invalid_argument("pck_curve: empty threshold list");
  }
  for (size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("pck_curve: thresholds must be strictly increasing");
    }
  }
  MetricsReport report;
  report.thresholds = thresholds;
  for (double t : thresholds) {
    report.pck.push_back(pck(preds, labels, t));
    const MpjpeResult m = mpjpe(preds, labels, t);
    report.mpjpe.push_back(m.value);
    report.correct_counts.push_back(m.correct_count);
  }
  return report;
}

std::string metrics_to_csv(const MetricsReport& report) {
  std::string out = "threshold,pck,mpjpe,correct_count\n";
  char buf[128];
  for (size_t i = 0; i < report.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%ld\n",
                  report.thresholds[i], report.pck[i], report.mpjpe[i],
                  report.correct_counts[i]);
    out += buf;
  }
  return out;
}

}  // namespace msds
