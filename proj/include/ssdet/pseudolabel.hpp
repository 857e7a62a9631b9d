#pragma once

#include <cstdint>
#include <string>

#include "ssdet/detector.hpp"

namespace ssdet {

/// Teacher predictions promoted to training targets.
struct PseudoLabelSet {
  std::vector<LabeledBox> boxes;
  int source_iteration = 0;
  double delta_used = 0.0;
};

/// Greedy NMS run independently within each class: a survivor suppresses
/// same-class boxes with IoU strictly greater than nms_iou; suppression
/// never crosses classes. Output is sorted by descending score (ties by
/// original index).
DetectionSet classwise_nms(const DetectionSet& dets, double nms_iou);

/// Keeps exactly the boxes with score >= delta, order preserved.
DetectionSet confidence_filter(const DetectionSet& dets, double delta);

/// The pseudo-label pipeline: predict on the weakly augmented view, then
/// class-wise NMS, then confidence thresholding. Pure with respect to the
/// teacher parameters; no gradient state exists anywhere on this path.
/// score_floor is the low candidate floor handed to predict (it is capped
/// at delta so the final filter alone decides what survives).
PseudoLabelSet generate_pseudo_labels(const DetectorNet& net, const ParamVector& teacher,
                                      const Image& weak_image, double delta, double nms_iou,
                                      int iteration, double score_floor = 0.05,
                                      double proposal_nms_iou = 0.7);

/// Debug dump: one COCO-format JSON of pseudo boxes for offline analysis.
void dump_pseudo_labels_coco(const std::vector<PseudoLabelSet>& sets, int class_count,
                             int image_size, const std::string& path);

}  // namespace ssdet
