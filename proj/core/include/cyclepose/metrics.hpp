#pragma once

#include <vector>

#include "cyclepose/common.hpp"

namespace cyclepose::metrics {

/// One-to-one instance matching outcome at a single IoU threshold.
struct MatchReport {
  double tau = 0.5;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<double> matched_ious;  // size == tp, each > tau
};

struct PanopticQuality {
  double pq = 0.0;
  double sq = 0.0;  // mean matched IoU; 0 when tp == 0
  double dq = 0.0;  // F1
};

/// Pairwise-IoU instance matching via a sparse label-intersection histogram.
/// Pairs with IoU > tau are matched one-to-one (unique for tau >= 0.5).
MatchReport matchInstances(const InstanceMask& pred, const InstanceMask& gt, double tau);

/// JAC = TP / (TP + FP + FN); both-empty convention -> 1.0.
double jaccard(const MatchReport& report);

struct JaccardSweep {
  double jac_50 = 0.0;        // tau = 0.5
  double jac_50_95 = 0.0;     // mean over tau in 0.5:0.05:0.95
  std::vector<double> per_tau;  // 10 values
};

/// Dataset-level sweep. Counts are pooled over all image pairs per tau before
/// dividing (set pooled=false for the per-image-average alternative).
JaccardSweep jaccardSweep(const std::vector<InstanceMask>& preds,
                          const std::vector<InstanceMask>& gts, bool pooled = true);
JaccardSweep jaccardSweep(const InstanceMask& pred, const InstanceMask& gt);

PanopticQuality panopticQuality(const MatchReport& report);

}  // namespace cyclepose::metrics
