#pragma once

#include <optional>
#include <vector>

#include "ssdet/detector.hpp"
#include "ssdet/image.hpp"
#include "ssdet/pseudolabel.hpp"

namespace ssdet {

/// COCO-style evaluation summary. `defined` is false when the ground truth
/// contains no instances at all, in which case no AP is reported (rather
/// than 0). per_class_ap holds one entry per class averaged over the ten
/// thresholds; classes absent from the ground truth carry no value.
struct EvalReport {
  bool defined = false;
  std::vector<double> iou_thresholds;            // 0.50 .. 0.95
  std::vector<double> ap_per_threshold;          // macro AP at each threshold
  double map = 0.0;                              // mean of ap_per_threshold
  std::vector<std::optional<double>> per_class_ap;
};

/// The ten COCO thresholds 0.50:0.05:0.95.
std::vector<double> coco_iou_thresholds();

/// Per-class average precision (score-sorted PR curve with greedy matching
/// at iou_thresh, all-point interpolation), macro-averaged over classes
/// present in the ground truth. Empty optional when no gt instances exist.
std::optional<double> average_precision(const std::vector<DetectionSet>& preds_per_image,
                                        const std::vector<std::vector<LabeledBox>>& gts_per_image,
                                        int class_count, double iou_thresh);

EvalReport map_50_95(const std::vector<DetectionSet>& preds_per_image,
                     const std::vector<std::vector<LabeledBox>>& gts_per_image,
                     int class_count);

/// Inference + class-wise NMS over a labeled sample set, then map_50_95.
EvalReport evaluate_detector(const DetectorNet& net, const ParamVector& params,
                             const std::vector<ImageSample>& samples, double score_floor,
                             double proposal_nms_iou, double class_nms_iou);

/// Pooled pseudo-label quality over a diagnostic slice.
struct PseudoDiagnostics {
  double accuracy = 0.0;        // matched with correct class / total pseudo
  double miou = 0.0;            // mean IoU over matched pairs, 0 if none
  double boxes_per_image = 0.0;
  std::vector<long> class_histogram;
  bool pseudo_empty = false;    // accuracy is 0-by-definition when set
};

/// accuracy/miou of one image's pseudo boxes against its hidden gt
/// (class-agnostic greedy matching; accuracy requires the class to agree).
std::pair<double, double> pseudo_accuracy_miou(const PseudoLabelSet& pseudo,
                                               const std::vector<LabeledBox>& gt_hidden,
                                               double match_iou);

PseudoDiagnostics compute_pseudo_diagnostics(
    const std::vector<PseudoLabelSet>& pseudo_sets,
    const std::vector<std::vector<LabeledBox>>& hidden_gts, int class_count,
    double match_iou);

enum class KlDirection { kGtFirst, kPseudoFirst };

/// KL divergence between the (epsilon-smoothed, normalized) class
/// histograms; KL(gt || pseudo) by default.
double class_histogram_kl(const std::vector<long>& pseudo_hist,
                          const std::vector<long>& gt_hist, double epsilon,
                          KlDirection direction = KlDirection::kGtFirst);

}  // namespace ssdet
