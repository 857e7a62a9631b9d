#include "ssdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ssdet/rng.hpp"

namespace ssdet {

void LossConfig::validate() const {
  if (gamma < 0.0) throw std::invalid_argument("loss.gamma: must be >= 0");
  if (!(rpn_pos_iou > 0.0 && rpn_pos_iou <= 1.0))
    throw std::invalid_argument("loss.rpn_pos_iou: must lie in (0, 1]");
  if (!(rpn_neg_iou >= 0.0 && rpn_neg_iou <= rpn_pos_iou))
    throw std::invalid_argument("loss.rpn_neg_iou: must lie in [0, rpn_pos_iou]");
  if (!(roi_pos_iou > 0.0 && roi_pos_iou <= 1.0))
    throw std::invalid_argument("loss.roi_pos_iou: must lie in (0, 1]");
  if (rpn_sample_count < 2 || roi_sample_count < 2)
    throw std::invalid_argument("loss sample counts: must be >= 2");
}

double focal_loss(const Eigen::VectorXd& probs, int target_class, double gamma) {
  if (target_class < 0 || target_class >= probs.size())
    throw std::out_of_range("focal_loss: target_class out of range");
  const double p = probs(target_class);
  const double p_safe = std::max(p, 1e-12);
  return -std::pow(1.0 - p, gamma) * std::log(p_safe);
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable binary cross-entropy from the logit.
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double smooth_l1(double d) { return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5; }
double smooth_l1_grad(double d) { return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0); }

// d(focal)/d(logit j) for a softmax row; gamma = 0 is the cross-entropy
// gradient p_j - [j == target].
double focal_logit_grad(const Eigen::MatrixXd& probs, int row, int target, int j,
                        double gamma) {
  const double pt = probs(row, target);
  const double pj = probs(row, j);
  const double indicator = (j == target) ? 1.0 : 0.0;
  const double log_pt = std::log(std::max(pt, 1e-12));
  const double factor =
      gamma * std::pow(1.0 - pt, gamma - 1.0) * pt * log_pt - std::pow(1.0 - pt, gamma);
  return factor * (indicator - pj);
}

struct AnchorAssignment {
  std::vector<int> label;       // 1 positive, 0 negative, -1 ignored
  std::vector<int> matched_gt;  // gt index for positives
};

AnchorAssignment assign_anchors(const std::vector<BoxD>& anchors,
                                const std::vector<LabeledBox>& gt, const LossConfig& cfg) {
  const size_t n = anchors.size();
  AnchorAssignment out;
  out.label.assign(n, 0);
  out.matched_gt.assign(n, -1);
  if (gt.empty()) return out;

  std::vector<double> best_iou(n, 0.0);
  std::vector<double> gt_best_iou(gt.size(), 0.0);
  std::vector<int> gt_best_anchor(gt.size(), -1);
  for (size_t a = 0; a < n; ++a) {
    for (size_t g = 0; g < gt.size(); ++g) {
      const double v = iou(anchors[a], gt[g].box);
      if (v > best_iou[a]) {
        best_iou[a] = v;
        out.matched_gt[a] = static_cast<int>(g);
      }
      if (v > gt_best_iou[g]) {
        gt_best_iou[g] = v;
        gt_best_anchor[g] = static_cast<int>(a);
      }
    }
    if (best_iou[a] >= cfg.rpn_pos_iou)
      out.label[a] = 1;
    else if (best_iou[a] < cfg.rpn_neg_iou)
      out.label[a] = 0;
    else
      out.label[a] = -1;
  }
  if (cfg.force_best_anchor_positive)
    for (size_t g = 0; g < gt.size(); ++g)
      if (gt_best_anchor[g] >= 0 && gt_best_iou[g] > 0.0)
        out.label[static_cast<size_t>(gt_best_anchor[g])] = 1;
  return out;
}

void seeded_shuffle(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
}

LossBreakdown detection_loss(const ProposalOutput& proposals, const RoiOutput& rois,
                             const std::vector<LabeledBox>& targets, const LossConfig& cfg,
                             uint64_t sample_seed, bool include_regression,
                             HeadGradients* grads) {
  cfg.validate();
  const int num_anchors = static_cast<int>(proposals.objectness_logits.size());
  Rng rng(mix_seed({sample_seed, 0xa2c40a5ULL}));

  if (grads) {
    grads->d_objectness_logits = Eigen::VectorXd::Zero(num_anchors);
    grads->d_rpn_deltas = Eigen::MatrixXd::Zero(num_anchors, 4);
    grads->d_cls_logits = Eigen::MatrixXd::Zero(rois.probs.rows(), rois.probs.cols());
    grads->d_roi_deltas = Eigen::MatrixXd::Zero(rois.deltas.rows(), rois.deltas.cols());
  }

  LossBreakdown out;

  // ---- RPN: balanced anchor sample, BCE on objectness, smooth-L1 on
  // positive-anchor deltas.
  const AnchorAssignment assign = assign_anchors(proposals.anchors, targets, cfg);
  std::vector<int> pos, neg;
  for (int a = 0; a < num_anchors; ++a) {
    if (assign.label[static_cast<size_t>(a)] == 1) pos.push_back(a);
    if (assign.label[static_cast<size_t>(a)] == 0) neg.push_back(a);
  }
  seeded_shuffle(pos, rng);
  seeded_shuffle(neg, rng);
  const int pos_keep = std::min<int>(static_cast<int>(pos.size()), cfg.rpn_sample_count / 2);
  const int neg_keep =
      std::min<int>(static_cast<int>(neg.size()), cfg.rpn_sample_count - pos_keep);
  pos.resize(static_cast<size_t>(pos_keep));
  neg.resize(static_cast<size_t>(neg_keep));

  const int n_cls = pos_keep + neg_keep;
  if (n_cls > 0) {
    double acc = 0.0;
    for (int a : pos) acc += bce_with_logit(proposals.objectness_logits(a), 1.0);
    for (int a : neg) acc += bce_with_logit(proposals.objectness_logits(a), 0.0);
    out.rpn_cls = acc / n_cls;
    if (grads) {
      for (int a : pos)
        grads->d_objectness_logits(a) = (sigmoid(proposals.objectness_logits(a)) - 1.0) / n_cls;
      for (int a : neg)
        grads->d_objectness_logits(a) = sigmoid(proposals.objectness_logits(a)) / n_cls;
    }
  }

  if (include_regression && pos_keep > 0) {
    double acc = 0.0;
    for (int a : pos) {
      const int g = assign.matched_gt[static_cast<size_t>(a)];
      const Eigen::Vector4d t =
          encode_box_delta(proposals.anchors[static_cast<size_t>(a)],
                           targets[static_cast<size_t>(g)].box);
      for (int d = 0; d < 4; ++d) {
        const double diff = proposals.deltas(a, d) - t(d);
        acc += smooth_l1(diff);
        if (grads) grads->d_rpn_deltas(a, d) = smooth_l1_grad(diff) / pos_keep;
      }
    }
    out.rpn_reg = acc / pos_keep;
  }

  // ---- ROI head: focal/cross-entropy over all rows, smooth-L1 over the
  // target-class delta of positive rows.
  const int n_rois = static_cast<int>(rois.probs.rows());
  if (n_rois > 0) {
    const int C = static_cast<int>(rois.probs.cols()) - 1;
    const double gamma = cfg.roi_cls_loss == RoiClsLoss::kFocal ? cfg.gamma : 0.0;

    std::vector<int> roi_class(static_cast<size_t>(n_rois), C);
    std::vector<int> roi_gt(static_cast<size_t>(n_rois), -1);
    for (int p = 0; p < n_rois; ++p) {
      double best = 0.0;
      for (size_t g = 0; g < targets.size(); ++g) {
        const double v = iou(rois.boxes[static_cast<size_t>(p)], targets[g].box);
        if (v > best) {
          best = v;
          roi_gt[static_cast<size_t>(p)] = static_cast<int>(g);
        }
      }
      if (best >= cfg.roi_pos_iou)
        roi_class[static_cast<size_t>(p)] = targets[static_cast<size_t>(
                                                        roi_gt[static_cast<size_t>(p)])]
                                                .class_id;
      else
        roi_gt[static_cast<size_t>(p)] = -1;
    }

    double cls_acc = 0.0;
    for (int p = 0; p < n_rois; ++p)
      cls_acc += focal_loss(rois.probs.row(p).transpose(), roi_class[static_cast<size_t>(p)],
                            gamma);
    out.roi_cls = cls_acc / n_rois;
    if (grads)
      for (int p = 0; p < n_rois; ++p)
        for (int j = 0; j <= C; ++j)
          grads->d_cls_logits(p, j) =
              focal_logit_grad(rois.probs, p, roi_class[static_cast<size_t>(p)], j, gamma) /
              n_rois;

    if (include_regression) {
      int n_pos = 0;
      for (int p = 0; p < n_rois; ++p)
        if (roi_gt[static_cast<size_t>(p)] >= 0) ++n_pos;
      if (n_pos > 0) {
        double reg_acc = 0.0;
        for (int p = 0; p < n_rois; ++p) {
          const int g = roi_gt[static_cast<size_t>(p)];
          if (g < 0) continue;
          const int cls = roi_class[static_cast<size_t>(p)];
          const Eigen::Vector4d t = encode_box_delta(rois.boxes[static_cast<size_t>(p)],
                                                     targets[static_cast<size_t>(g)].box);
          for (int d = 0; d < 4; ++d) {
            const double diff = rois.deltas(p, 4 * cls + d) - t(d);
            reg_acc += smooth_l1(diff);
            if (grads) grads->d_roi_deltas(p, 4 * cls + d) = smooth_l1_grad(diff) / n_pos;
          }
        }
        out.roi_reg = reg_acc / n_pos;
      }
    }
  }

  out.total = out.rpn_cls + out.rpn_reg + out.roi_cls + out.roi_reg;
  return out;
}

}  // namespace

LossBreakdown supervised_loss(const ProposalOutput& proposals, const RoiOutput& rois,
                              const std::vector<LabeledBox>& gt, const LossConfig& cfg,
                              uint64_t sample_seed, HeadGradients* grads) {
  return detection_loss(proposals, rois, gt, cfg, sample_seed, true, grads);
}

LossBreakdown unsupervised_loss(const ProposalOutput& proposals, const RoiOutput& rois,
                                const std::vector<LabeledBox>& pseudo, const LossConfig& cfg,
                                uint64_t sample_seed, HeadGradients* grads) {
  return detection_loss(proposals, rois, pseudo, cfg, sample_seed, false, grads);
}

std::vector<BoxD> make_roi_training_boxes(const std::vector<BoxD>& anchors,
                                          const std::vector<LabeledBox>& targets,
                                          double img_w, double img_h,
                                          const LossConfig& cfg, uint64_t seed) {
  Rng rng(mix_seed({seed, 0xb0c5e5ULL}));

  std::vector<BoxD> positives;
  for (const auto& t : targets) {
    positives.push_back(t.box);
    for (int j = 0; j < 2; ++j) {
      const double w = t.box.width(), h = t.box.height();
      const double cx = t.box.center_x() + rng.uniform(-0.12, 0.12) * w;
      const double cy = t.box.center_y() + rng.uniform(-0.12, 0.12) * h;
      const double nw = w * std::exp(rng.uniform(-0.12, 0.12));
      const double nh = h * std::exp(rng.uniform(-0.12, 0.12));
      BoxD jit = clip_box(BoxD{cx - nw / 2, cy - nh / 2, cx + nw / 2, cy + nh / 2},
                          img_w, img_h);
      positives.push_back(iou(jit, t.box) >= cfg.roi_pos_iou ? jit : t.box);
    }
  }

  std::vector<int> overlapping, background;
  for (size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    for (const auto& t : targets) best = std::max(best, iou(anchors[a], t.box));
    (best >= cfg.roi_pos_iou ? overlapping : background).push_back(static_cast<int>(a));
  }
  seeded_shuffle(overlapping, rng);
  for (int a : overlapping) positives.push_back(clip_box(anchors[static_cast<size_t>(a)],
                                                         img_w, img_h));

  std::vector<int> pos_order(positives.size());
  std::iota(pos_order.begin(), pos_order.end(), 0);
  // The plain target boxes stay in front so tiny samples always contain
  // exact positives; the rest is shuffled.
  if (pos_order.size() > targets.size()) {
    std::vector<int> tail(pos_order.begin() + static_cast<long>(targets.size()),
                          pos_order.end());
    seeded_shuffle(tail, rng);
    std::copy(tail.begin(), tail.end(), pos_order.begin() + static_cast<long>(targets.size()));
  }
  const int pos_keep =
      std::min<int>(static_cast<int>(positives.size()), cfg.roi_sample_count / 2);

  seeded_shuffle(background, rng);
  const int neg_keep =
      std::min<int>(static_cast<int>(background.size()), cfg.roi_sample_count - pos_keep);

  std::vector<BoxD> out;
  out.reserve(static_cast<size_t>(pos_keep + neg_keep));
  for (int i = 0; i < pos_keep; ++i)
    out.push_back(positives[static_cast<size_t>(pos_order[static_cast<size_t>(i)])]);
  for (int i = 0; i < neg_keep; ++i)
    out.push_back(clip_box(anchors[static_cast<size_t>(background[static_cast<size_t>(i)])],
                           img_w, img_h));
  return out;
}

}  // namespace ssdet
