#include "cyclepose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace cyclepose::metrics {

MatchReport matchInstances(const InstanceMask& pred, const InstanceMask& gt, double tau) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ConfigError("matchInstances: shape mismatch");

  std::unordered_map<int32_t, long> pred_area, gt_area;
  std::map<std::pair<int32_t, int32_t>, long> inter;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const int32_t p = pred.labels[i], g = gt.labels[i];
    if (p > 0) ++pred_area[p];
    if (g > 0) ++gt_area[g];
    if (p > 0 && g > 0) ++inter[{p, g}];
  }

  MatchReport report;
  report.tau = tau;

  // Candidate pairs with IoU strictly above tau. For tau >= 0.5 each label
  // can appear in at most one such pair, so the matching is unique; the sort
  // below also makes the greedy pass exact for smaller thresholds.
  struct Cand { int32_t p, g; double iou; };
  std::vector<Cand> cands;
  for (const auto& [pg, n] : inter) {
    const double u = static_cast<double>(pred_area[pg.first] + gt_area[pg.second] - n);
    const double iou = n / u;
    if (iou > tau) cands.push_back({pg.first, pg.second, iou});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.iou > b.iou; });

  std::unordered_map<int32_t, bool> p_used, g_used;
  for (const auto& c : cands) {
    if (p_used[c.p] || g_used[c.g]) continue;
    p_used[c.p] = g_used[c.g] = true;
    report.matched_ious.push_back(c.iou);
  }
  report.tp = static_cast<int>(report.matched_ious.size());
  report.fp = static_cast<int>(pred_area.size()) - report.tp;
  report.fn = static_cast<int>(gt_area.size()) - report.tp;
  return report;
}

double jaccard(const MatchReport& r) {
  const int denom = r.tp + r.fp + r.fn;
  if (denom == 0) return 1.0;  // both empty
  return static_cast<double>(r.tp) / denom;
}

JaccardSweep jaccardSweep(const std::vector<InstanceMask>& preds,
                          const std::vector<InstanceMask>& gts, bool pooled) {
  if (preds.size() != gts.size() || preds.empty())
    throw ConfigError("jaccardSweep: need equal-size, nonempty prediction/gt lists");
  JaccardSweep sweep;
  sweep.per_tau.resize(10);
  for (int t = 0; t < 10; ++t) {
    const double tau = 0.5 + 0.05 * t;
    if (pooled) {
      long tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < preds.size(); ++i) {
        const auto r = matchInstances(preds[i], gts[i], tau);
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
      }
      sweep.per_tau[t] = (tp + fp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp + fn);
    } else {
      double acc = 0.0;
      for (size_t i = 0; i < preds.size(); ++i)
        acc += jaccard(matchInstances(preds[i], gts[i], tau));
      sweep.per_tau[t] = acc / preds.size();
    }
  }
  sweep.jac_50 = sweep.per_tau[0];
  double s = 0.0;
  for (double v : sweep.per_tau) s += v;
  sweep.jac_50_95 = s / 10.0;
  return sweep;
}

JaccardSweep jaccardSweep(const InstanceMask& pred, const InstanceMask& gt) {
  return jaccardSweep(std::vector<InstanceMask>{pred}, std::vector<InstanceMask>{gt});
}

PanopticQuality panopticQuality(const MatchReport& r) {
  PanopticQuality q;
  const double denom = r.tp + 0.5 * r.fp + 0.5 * r.fn;
  if (denom == 0.0) return {1.0, 1.0, 1.0};  // both empty
  q.dq = r.tp / denom;
  if (r.tp > 0) {
    double s = 0.0;
    for (double v : r.matched_ious) s += v;
    q.sq = s / r.tp;
  }
  q.pq = q.sq * q.dq;
  return q;
}

}  // namespace cyclepose::metrics
