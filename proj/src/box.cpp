#include "ssdet/box.hpp"

#include <numeric>

namespace ssdet {

std::vector<int> match_boxes(const std::vector<LabeledBox>& preds,
                             const std::vector<LabeledBox>& gts,
                             double iou_thresh) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<size_t>(a)].score > preds[static_cast<size_t>(b)].score;
  });

  std::vector<int> result(preds.size(), kNoMatch);
  std::vector<bool> gt_taken(gts.size(), false);
  for (int pi : order) {
    double best_iou = 0.0;
    int best_gt = kNoMatch;
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi]) continue;
      const double v = iou(preds[static_cast<size_t>(pi)].box, gts[gi].box);
      if (v >= iou_thresh && v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt != kNoMatch) {
      gt_taken[static_cast<size_t>(best_gt)] = true;
      result[static_cast<size_t>(pi)] = best_gt;
    }
  }
  return result;
}

}  // namespace ssdet
