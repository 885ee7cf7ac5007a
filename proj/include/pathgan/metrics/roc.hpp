#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pathgan/core/error.hpp"

namespace pathgan::metrics {

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocResult {
  /// From (0,0) to (1,1), one point per distinct score, descending threshold.
  std::vector<RocPoint> curve;
  double auc = 0.0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

/// Higher score = "more real"; `is_real` marks the positive class. Tied
/// scores form one threshold step, so the trapezoidal area equals the
/// Mann–Whitney statistic with ties counted as one half.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<bool>& is_real) {
  if (scores.size() != is_real.size()) throw ArgumentError("roc: scores/labels length mismatch");
  RocResult r;
  for (bool b : is_real) (b ? r.positives : r.negatives)++;
  if (r.positives == 0 || r.negatives == 0) throw ArgumentError("roc: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const double P = static_cast<double>(r.positives), N = static_cast<double>(r.negatives);
  std::int64_t tp = 0, fp = 0, twice_area = 0;
  r.curve.push_back({scores[order.front()] + 1.0, 0.0, 0.0});
  for (std::size_t i = 0; i < order.size();) {
    std::int64_t gtp = 0, gfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (is_real[order[i]] ? gtp : gfp)++;
    twice_area += gfp * (2 * tp + gtp);
    tp += gtp;
    fp += gfp;
    r.curve.push_back({s, fp / N, tp / P});
  }
  r.auc = static_cast<double>(twice_area) / (2.0 * P * N);
  return r;
}

} // namespace pathgan::metrics
