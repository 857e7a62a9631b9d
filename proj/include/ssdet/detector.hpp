#pragma once

#include <Eigen/Core>
#include <vector>

#include "ssdet/box.hpp"
#include "ssdet/image.hpp"
#include "ssdet/params.hpp"
#include "ssdet/rng.hpp"

namespace ssdet {

/// Scored detections for one image, descending by score.
using DetectionSet = std::vector<LabeledBox>;

/// Architecture of the toy two-stage detector: three stride-2 conv blocks
/// producing one stride-8 feature map, an RPN head (binary objectness plus
/// box deltas over a single-scale anchor grid), and an ROI head ((C+1)-way
/// classifier plus class-specific box refinement over pooled features).
struct DetectorConfig {
  int image_size = 64;
  int class_count = 6;
  int c1 = 8, c2 = 16, c3 = 24;  // backbone channel widths
  int roi_fc_dim = 48;
  int roi_pool = 4;
  double anchor_base = 20.0;                      // sqrt of anchor area, pixels
  std::vector<double> anchor_aspects = {0.5, 1.0, 2.0};  // height / width
  int pre_nms_top = 100;
  int topk_proposals = 50;
  double proposal_nms_iou = 0.7;
  double delta_clamp = 4.0;  // log-space growth clamp when decoding

  int grid() const { return image_size / 8; }
  int anchors_per_cell() const { return static_cast<int>(anchor_aspects.size()); }
  int num_anchors() const { return grid() * grid() * anchors_per_cell(); }

  void validate() const;
};

/// First-stage outputs over the full anchor grid.
struct ProposalOutput {
  Eigen::VectorXd objectness;         // sigmoid probabilities, one per anchor
  Eigen::VectorXd objectness_logits;  // pre-sigmoid, used by the losses
  Eigen::MatrixXd deltas;             // num_anchors x 4 (dx, dy, dw, dh)
  std::vector<BoxD> anchors;
};

/// Second-stage outputs, one row per evaluated proposal box.
struct RoiOutput {
  Eigen::MatrixXd probs;   // n x (C+1); each row sums to 1, column C = background
  Eigen::MatrixXd logits;  // n x (C+1)
  Eigen::MatrixXd deltas;  // n x 4C, class-specific refinements
  std::vector<BoxD> boxes;  // the proposals these rows describe
};

/// Saved activations of one training forward pass; consumed by backward().
struct ForwardTrace {
  bool has_backbone = false;
  Eigen::MatrixXd input;                 // 3 x S^2
  Eigen::MatrixXd cols1, cols2, cols3, cols4;  // im2col matrices
  Eigen::MatrixXd pre1, pre2, pre3, pre4;      // pre-ReLU conv outputs
  Eigen::MatrixXd feat3, feat4;                // post-ReLU backbone / RPN features

  bool has_roi = false;
  Eigen::MatrixXd pooled;    // c3*P^2 x n
  Eigen::MatrixXd roi_pre;   // fc1 pre-ReLU, D x n
  Eigen::MatrixXd roi_hidden;  // post-ReLU
  struct PoolSample {
    int idx[4];
    double w[4];
  };
  std::vector<PoolSample> pool_samples;  // n * P^2 entries, bin-major per proposal
};

/// Loss gradients with respect to the head outputs, in the same shapes the
/// heads emit. Zero matrices mean "no gradient from this head".
struct HeadGradients {
  Eigen::VectorXd d_objectness_logits;  // num_anchors
  Eigen::MatrixXd d_rpn_deltas;         // num_anchors x 4
  Eigen::MatrixXd d_cls_logits;         // n x (C+1)
  Eigen::MatrixXd d_roi_deltas;         // n x 4C
};

/// Standard (center offset / log size) box-delta encoding.
Eigen::Vector4d encode_box_delta(const BoxD& anchor, const BoxD& target);
BoxD decode_box_delta(const BoxD& anchor, const Eigen::Vector4d& delta, double clamp);

/// Greedy non-maximum suppression over one box set. Returns the kept
/// indices in descending score order; ties go to the lower original index;
/// a survivor suppresses boxes with IoU strictly greater than iou_thresh.
std::vector<int> greedy_nms_indices(const std::vector<BoxD>& boxes,
                                    const std::vector<double>& scores,
                                    double iou_thresh);

class DetectorNet {
 public:
  explicit DetectorNet(const DetectorConfig& cfg);

  const DetectorConfig& config() const { return cfg_; }
  const std::vector<BoxD>& anchors() const { return anchors_; }
  std::shared_ptr<const ParamLayout> layout() const { return layout_; }

  /// Zeroed parameters with this net's layout.
  ParamVector zero_params() const;
  /// He-style initialization; detection heads start near zero with a low
  /// objectness prior.
  ParamVector init_params(Rng& rng) const;

  /// Backbone + RPN. Deterministic; pass a trace to keep activations for
  /// backward(). Throws ArchitectureError on layout or image-size mismatch.
  ProposalOutput forward_proposals(const ParamVector& params, const Image& image,
                                   ForwardTrace* trace = nullptr) const;

  /// ROI head over the given proposal boxes (empty list yields empty
  /// outputs). Reuses the trace's backbone activations when present,
  /// otherwise recomputes them.
  RoiOutput forward_roi(const ParamVector& params, const Image& image,
                        const std::vector<BoxD>& proposals,
                        ForwardTrace* trace = nullptr) const;

  /// Accumulates d(loss)/d(params) into grad (size layout->total()) by
  /// backpropagating the head gradients through the traced activations.
  void backward(const ParamVector& params, const ForwardTrace& trace,
                const HeadGradients& grads, Eigen::VectorXd& grad) const;

  /// Inference: decode proposals, keep the top-k by objectness after
  /// proposal NMS, classify, refine, drop background rows and rows under
  /// score_floor. Sorted by descending score. Class-wise NMS is left to the
  /// caller (see pseudolabel / eval pipelines).
  DetectionSet predict(const ParamVector& params, const Image& image,
                       double score_floor, double proposal_nms_iou) const;

 private:
  void check(const ParamVector& params, const Image& image) const;
  void forward_backbone(const ParamVector& params, const Image& image,
                        ForwardTrace& trace) const;

  DetectorConfig cfg_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<BoxD> anchors_;
};

}  // namespace ssdet
