#pragma once

// Brute-force average-precision oracle. For every prefix of the ranked
// prediction list (equivalently, every score threshold when scores are
// distinct) it recomputes matching from scratch and takes one
// precision/recall point, then integrates recall steps against the
// precision envelope. Independent of the incremental bookkeeping in
// evalmetrics.cpp.

#include <algorithm>
#include <optional>
#include <vector>

#include "ssdet/box.hpp"
#include "ssdet/detector.hpp"

namespace ssdet::testsupport {

inline std::optional<double> oracle_class_ap(
    const std::vector<DetectionSet>& preds, const std::vector<std::vector<LabeledBox>>& gts,
    int cls, double iou_thresh) {
  long total_gt = 0;
  for (const auto& g : gts)
    for (const auto& lb : g)
      if (lb.class_id == cls) ++total_gt;
  if (total_gt == 0) return std::nullopt;

  struct Ref {
    size_t image, index;
    double score;
  };
  std::vector<Ref> ranked;
  for (size_t im = 0; im < preds.size(); ++im)
    for (size_t i = 0; i < preds[im].size(); ++i)
      if (preds[im][i].class_id == cls) ranked.push_back({im, i, preds[im][i].score});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });

  // One PR point per prefix, each matched from scratch.
  std::vector<double> precision, recall;
  for (size_t cut = 1; cut <= ranked.size(); ++cut) {
    std::vector<std::vector<bool>> used(gts.size());
    for (size_t im = 0; im < gts.size(); ++im) used[im].assign(gts[im].size(), false);
    long tp = 0;
    for (size_t r = 0; r < cut; ++r) {
      const auto& ref = ranked[r];
      const BoxD& box = preds[ref.image][ref.index].box;
      double best_v = 0.0;
      int best_g = -1;
      for (size_t g = 0; g < gts[ref.image].size(); ++g) {
        if (gts[ref.image][g].class_id != cls || used[ref.image][g]) continue;
        const double v = iou(box, gts[ref.image][g].box);
        if (v >= iou_thresh && v > best_v) {
          best_v = v;
          best_g = static_cast<int>(g);
        }
      }
      if (best_g >= 0) {
        used[ref.image][static_cast<size_t>(best_g)] = true;
        ++tp;
      }
    }
    precision.push_back(double(tp) / double(cut));
    recall.push_back(double(tp) / double(total_gt));
  }

  double ap = 0.0;
  for (size_t k = 0; k < precision.size(); ++k) {
    const double r_lo = k == 0 ? 0.0 : recall[k - 1];
    if (recall[k] <= r_lo) continue;
    double envelope = 0.0;
    for (size_t j = k; j < precision.size(); ++j) envelope = std::max(envelope, precision[j]);
    ap += (recall[k] - r_lo) * envelope;
  }
  return ap;
}

inline std::optional<double> oracle_macro_ap(const std::vector<DetectionSet>& preds,
                                             const std::vector<std::vector<LabeledBox>>& gts,
                                             int class_count, double iou_thresh) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < class_count; ++c) {
    const auto ap = oracle_class_ap(preds, gts, c, iou_thresh);
    if (ap) {
      sum += *ap;
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  return sum / present;
}

}  // namespace ssdet::testsupport
