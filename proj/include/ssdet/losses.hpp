#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ssdet/box.hpp"
#include "ssdet/detector.hpp"

namespace ssdet {

enum class RoiClsLoss { kFocal, kCrossEntropy };

struct LossConfig {
  RoiClsLoss roi_cls_loss = RoiClsLoss::kFocal;
  double gamma = 2.0;

  // Anchor/proposal assignment (Faster-RCNN convention).
  double rpn_pos_iou = 0.7;
  double rpn_neg_iou = 0.3;
  double roi_pos_iou = 0.5;
  // The per-gt best anchor is forced positive even below rpn_pos_iou; with a
  // sparse single-scale grid most ground truths have no anchor above 0.7,
  // so without this the RPN never sees them.
  bool force_best_anchor_positive = true;

  // Balanced subsampling: at most half of each sample is positive.
  int rpn_sample_count = 64;
  int roi_sample_count = 32;

  void validate() const;
};

/// The four loss terms. Supervised losses fill all four; unsupervised
/// losses have rpn_reg and roi_reg identically zero. total is always the
/// exact sum of the four terms.
struct LossBreakdown {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double roi_cls = 0.0;
  double roi_reg = 0.0;
  double total = 0.0;
};

/// Multi-class focal loss -(1 - p_t)^gamma * log(p_t) for one probability
/// vector. gamma = 0 reduces to cross-entropy exactly. p_t is floored at a
/// small epsilon before the log. Throws std::out_of_range when target_class
/// is outside [0, probs.size()).
double focal_loss(const Eigen::VectorXd& probs, int target_class, double gamma);

/// Supervised four-part loss (RPN binary cross-entropy + smooth-L1, ROI
/// focal/cross-entropy + smooth-L1). Classification terms average over the
/// seeded balanced sample; regression terms average over positives and are
/// zero when gt is empty. When `grads` is given it receives d(total)/d(head
/// outputs) for the same sampled sets.
LossBreakdown supervised_loss(const ProposalOutput& proposals, const RoiOutput& rois,
                              const std::vector<LabeledBox>& gt, const LossConfig& cfg,
                              uint64_t sample_seed, HeadGradients* grads = nullptr);

/// Classification-only variant used on pseudo-labeled images: identical
/// assignment and classification machinery, but both regression terms are
/// identically zero and contribute no gradient to any regression head.
LossBreakdown unsupervised_loss(const ProposalOutput& proposals, const RoiOutput& rois,
                                const std::vector<LabeledBox>& pseudo, const LossConfig& cfg,
                                uint64_t sample_seed, HeadGradients* grads = nullptr);

/// Training-time proposal set for the ROI head: the target boxes, two
/// seeded jitters of each, anchors overlapping a target at roi_pos_iou, and
/// seeded background anchors, capped at cfg.roi_sample_count with at most
/// half positives. Independent of the current parameters, which keeps the
/// loss an exactly differentiable function of the network weights.
std::vector<BoxD> make_roi_training_boxes(const std::vector<BoxD>& anchors,
                                          const std::vector<LabeledBox>& targets,
                                          double img_w, double img_h,
                                          const LossConfig& cfg, uint64_t seed);

}  // namespace ssdet
