#include "ssdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssdet {

void DetectorConfig::validate() const {
  if (image_size < 16 || image_size % 8 != 0)
    throw std::invalid_argument("model.image_size: must be a positive multiple of 8");
  if (class_count < 1) throw std::invalid_argument("model.class_count: must be >= 1");
  if (c1 < 1 || c2 < 1 || c3 < 1 || roi_fc_dim < 1)
    throw std::invalid_argument("model channel widths must be positive");
  if (roi_pool < 1) throw std::invalid_argument("model.roi_pool: must be >= 1");
  if (anchor_aspects.empty()) throw std::invalid_argument("model.anchor_aspects: empty");
  if (anchor_base <= 0.0) throw std::invalid_argument("model.anchor_base: must be positive");
  if (topk_proposals < 1 || pre_nms_top < topk_proposals)
    throw std::invalid_argument("model proposal counts: need pre_nms_top >= topk_proposals >= 1");
}

Eigen::Vector4d encode_box_delta(const BoxD& anchor, const BoxD& target) {
  const double aw = std::max(anchor.width(), 1e-3);
  const double ah = std::max(anchor.height(), 1e-3);
  const double tw = std::max(target.width(), 1e-3);
  const double th = std::max(target.height(), 1e-3);
  return {(target.center_x() - anchor.center_x()) / aw,
          (target.center_y() - anchor.center_y()) / ah,
          std::log(tw / aw), std::log(th / ah)};
}

BoxD decode_box_delta(const BoxD& anchor, const Eigen::Vector4d& delta, double clamp) {
  const double aw = std::max(anchor.width(), 1e-3);
  const double ah = std::max(anchor.height(), 1e-3);
  const double cx = anchor.center_x() + delta(0) * aw;
  const double cy = anchor.center_y() + delta(1) * ah;
  const double w = aw * std::exp(std::clamp(delta(2), -clamp, clamp));
  const double h = ah * std::exp(std::clamp(delta(3), -clamp, clamp));
  return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

std::vector<int> greedy_nms_indices(const std::vector<BoxD>& boxes,
                                    const std::vector<double>& scores,
                                    double iou_thresh) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  std::vector<int> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (int i : order) {
    if (suppressed[static_cast<size_t>(i)]) continue;
    kept.push_back(i);
    for (int j : order) {
      if (j == i || suppressed[static_cast<size_t>(j)]) continue;
      if (iou(boxes[static_cast<size_t>(i)], boxes[static_cast<size_t>(j)]) > iou_thresh)
        suppressed[static_cast<size_t>(j)] = true;
    }
  }
  return kept;
}

namespace {

// im2col for a 3x3 kernel with pad 1. Input layout (cin, H*W), pixel
// index y*W + x. Output (cin*9, Ho*Wo).
Eigen::MatrixXd im2col3x3(const Eigen::MatrixXd& in, int H, int W, int stride,
                          int Ho, int Wo) {
  const int cin = static_cast<int>(in.rows());
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(cin * 9, Ho * Wo);
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int r = ci * 9 + ky * 3 + kx;
        for (int yo = 0; yo < Ho; ++yo) {
          const int yi = stride * yo + ky - 1;
          if (yi < 0 || yi >= H) continue;
          for (int xo = 0; xo < Wo; ++xo) {
            const int xi = stride * xo + kx - 1;
            if (xi < 0 || xi >= W) continue;
            cols(r, yo * Wo + xo) = in(ci, yi * W + xi);
          }
        }
      }
  return cols;
}

void col2im3x3_add(const Eigen::MatrixXd& dcols, int H, int W, int stride,
                   int Ho, int Wo, Eigen::MatrixXd& din) {
  const int cin = static_cast<int>(din.rows());
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int r = ci * 9 + ky * 3 + kx;
        for (int yo = 0; yo < Ho; ++yo) {
          const int yi = stride * yo + ky - 1;
          if (yi < 0 || yi >= H) continue;
          for (int xo = 0; xo < Wo; ++xo) {
            const int xi = stride * xo + kx - 1;
            if (xi < 0 || xi >= W) continue;
            din(ci, yi * W + xi) += dcols(r, yo * Wo + xo);
          }
        }
      }
}

Eigen::MatrixXd affine(const Eigen::Map<const Eigen::MatrixXd>& w,
                       const Eigen::Map<const Eigen::MatrixXd>& b,
                       const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = w * x;
  out.colwise() += b.col(0);
  return out;
}

}  // namespace

DetectorNet::DetectorNet(const DetectorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  auto layout = std::make_shared<ParamLayout>();
  const int C = cfg_.class_count, A = cfg_.anchors_per_cell();
  layout->add("conv1.w", cfg_.c1, 3 * 9);
  layout->add("conv1.b", cfg_.c1, 1);
  layout->add("conv2.w", cfg_.c2, cfg_.c1 * 9);
  layout->add("conv2.b", cfg_.c2, 1);
  layout->add("conv3.w", cfg_.c3, cfg_.c2 * 9);
  layout->add("conv3.b", cfg_.c3, 1);
  layout->add("rpn_conv.w", cfg_.c3, cfg_.c3 * 9);
  layout->add("rpn_conv.b", cfg_.c3, 1);
  layout->add("rpn_obj.w", A, cfg_.c3);
  layout->add("rpn_obj.b", A, 1);
  layout->add("rpn_delta.w", 4 * A, cfg_.c3);
  layout->add("rpn_delta.b", 4 * A, 1);
  layout->add("roi_fc1.w", cfg_.roi_fc_dim, cfg_.c3 * cfg_.roi_pool * cfg_.roi_pool);
  layout->add("roi_fc1.b", cfg_.roi_fc_dim, 1);
  layout->add("roi_cls.w", C + 1, cfg_.roi_fc_dim);
  layout->add("roi_cls.b", C + 1, 1);
  layout->add("roi_delta.w", 4 * C, cfg_.roi_fc_dim);
  layout->add("roi_delta.b", 4 * C, 1);
  layout_ = std::move(layout);

  const int G = cfg_.grid();
  anchors_.reserve(static_cast<size_t>(cfg_.num_anchors()));
  for (int y = 0; y < G; ++y)
    for (int x = 0; x < G; ++x)
      for (double aspect : cfg_.anchor_aspects) {
        const double cx = (x + 0.5) * 8.0, cy = (y + 0.5) * 8.0;
        const double w = cfg_.anchor_base / std::sqrt(aspect);
        const double h = cfg_.anchor_base * std::sqrt(aspect);
        anchors_.push_back(BoxD{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
      }
}

ParamVector DetectorNet::zero_params() const { return make_param_vector(layout_); }

ParamVector DetectorNet::init_params(Rng& rng) const {
  ParamVector p = make_param_vector(layout_);
  auto fill_normal = [&](const std::string& name, double std_dev) {
    auto v = p.view(name);
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = std_dev * rng.normal();
  };
  auto he = [&](const std::string& name) {
    const auto& e = layout_->entry(name);
    fill_normal(name, std::sqrt(2.0 / static_cast<double>(e.cols)));
  };
  he("conv1.w");
  he("conv2.w");
  he("conv3.w");
  he("rpn_conv.w");
  fill_normal("rpn_obj.w", 0.01);
  fill_normal("rpn_delta.w", 0.01);
  he("roi_fc1.w");
  fill_normal("roi_cls.w", 0.01);
  fill_normal("roi_delta.w", 0.01);
  // Low objectness prior keeps the RPN quiet at the start of training.
  p.view("rpn_obj.b").setConstant(-2.0);
  return p;
}

void DetectorNet::check(const ParamVector& params, const Image& image) const {
  if (!params.layout || !(*params.layout == *layout_))
    throw ArchitectureError("parameter layout does not match this architecture");
  if (image.width != cfg_.image_size || image.height != cfg_.image_size)
    throw ArchitectureError("image size does not match the configured architecture");
}

void DetectorNet::forward_backbone(const ParamVector& params, const Image& image,
                                   ForwardTrace& t) const {
  const int S = cfg_.image_size;
  t.input.resize(3, S * S);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x)
        t.input(c, y * S + x) = image.ch[static_cast<size_t>(c)](y, x);

  const int S2 = S / 2, S4 = S / 4, G = S / 8;
  t.cols1 = im2col3x3(t.input, S, S, 2, S2, S2);
  t.pre1 = affine(params.view("conv1.w"), params.view("conv1.b"), t.cols1);
  Eigen::MatrixXd feat1 = t.pre1.cwiseMax(0.0);

  t.cols2 = im2col3x3(feat1, S2, S2, 2, S4, S4);
  t.pre2 = affine(params.view("conv2.w"), params.view("conv2.b"), t.cols2);
  Eigen::MatrixXd feat2 = t.pre2.cwiseMax(0.0);

  t.cols3 = im2col3x3(feat2, S4, S4, 2, G, G);
  t.pre3 = affine(params.view("conv3.w"), params.view("conv3.b"), t.cols3);
  t.feat3 = t.pre3.cwiseMax(0.0);

  t.cols4 = im2col3x3(t.feat3, G, G, 1, G, G);
  t.pre4 = affine(params.view("rpn_conv.w"), params.view("rpn_conv.b"), t.cols4);
  t.feat4 = t.pre4.cwiseMax(0.0);
  t.has_backbone = true;
}

ProposalOutput DetectorNet::forward_proposals(const ParamVector& params, const Image& image,
                                              ForwardTrace* trace) const {
  check(params, image);
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  if (!t.has_backbone) forward_backbone(params, image, t);

  const int G = cfg_.grid(), A = cfg_.anchors_per_cell();
  const Eigen::MatrixXd obj = affine(params.view("rpn_obj.w"), params.view("rpn_obj.b"), t.feat4);
  const Eigen::MatrixXd del =
      affine(params.view("rpn_delta.w"), params.view("rpn_delta.b"), t.feat4);

  ProposalOutput out;
  const int n = cfg_.num_anchors();
  out.objectness_logits.resize(n);
  out.objectness.resize(n);
  out.deltas.resize(n, 4);
  for (int q = 0; q < G * G; ++q)
    for (int k = 0; k < A; ++k) {
      const int a = q * A + k;
      const double z = obj(k, q);
      out.objectness_logits(a) = z;
      out.objectness(a) = 1.0 / (1.0 + std::exp(-z));
      for (int d = 0; d < 4; ++d) out.deltas(a, d) = del(k * 4 + d, q);
    }
  out.anchors = anchors_;
  return out;
}

RoiOutput DetectorNet::forward_roi(const ParamVector& params, const Image& image,
                                   const std::vector<BoxD>& proposals,
                                   ForwardTrace* trace) const {
  check(params, image);
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  if (!t.has_backbone) forward_backbone(params, image, t);

  const int G = cfg_.grid(), P = cfg_.roi_pool, C = cfg_.class_count;
  const int n = static_cast<int>(proposals.size());
  const int pooled_dim = cfg_.c3 * P * P;

  t.pooled = Eigen::MatrixXd::Zero(pooled_dim, n);
  t.pool_samples.assign(static_cast<size_t>(n) * P * P, ForwardTrace::PoolSample{});
  for (int p = 0; p < n; ++p) {
    const BoxD& bx = proposals[static_cast<size_t>(p)];
    for (int i = 0; i < P; ++i)
      for (int j = 0; j < P; ++j) {
        const double xc = bx.x_min + (j + 0.5) * bx.width() / P;
        const double yc = bx.y_min + (i + 0.5) * bx.height() / P;
        const double fx = std::clamp(xc / 8.0 - 0.5, 0.0, double(G - 1));
        const double fy = std::clamp(yc / 8.0 - 0.5, 0.0, double(G - 1));
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const int x1 = std::min(x0 + 1, G - 1), y1 = std::min(y0 + 1, G - 1);
        const double wx = fx - x0, wy = fy - y0;
        ForwardTrace::PoolSample s;
        s.idx[0] = y0 * G + x0;
        s.idx[1] = y0 * G + x1;
        s.idx[2] = y1 * G + x0;
        s.idx[3] = y1 * G + x1;
        s.w[0] = (1 - wy) * (1 - wx);
        s.w[1] = (1 - wy) * wx;
        s.w[2] = wy * (1 - wx);
        s.w[3] = wy * wx;
        t.pool_samples[static_cast<size_t>(p) * P * P + static_cast<size_t>(i * P + j)] = s;
        for (int c = 0; c < cfg_.c3; ++c) {
          double acc = 0.0;
          for (int u = 0; u < 4; ++u) acc += s.w[u] * t.feat3(c, s.idx[u]);
          t.pooled(c * P * P + i * P + j, p) = acc;
        }
      }
  }

  RoiOutput out;
  out.boxes = proposals;
  if (n == 0) {
    out.probs.resize(0, C + 1);
    out.logits.resize(0, C + 1);
    out.deltas.resize(0, 4 * C);
    t.has_roi = true;
    t.roi_pre.resize(cfg_.roi_fc_dim, 0);
    t.roi_hidden.resize(cfg_.roi_fc_dim, 0);
    return out;
  }

  t.roi_pre = affine(params.view("roi_fc1.w"), params.view("roi_fc1.b"), t.pooled);
  t.roi_hidden = t.roi_pre.cwiseMax(0.0);
  const Eigen::MatrixXd cls =
      affine(params.view("roi_cls.w"), params.view("roi_cls.b"), t.roi_hidden);
  const Eigen::MatrixXd del =
      affine(params.view("roi_delta.w"), params.view("roi_delta.b"), t.roi_hidden);

  out.logits = cls.transpose();
  out.deltas = del.transpose();
  out.probs.resize(n, C + 1);
  for (int p = 0; p < n; ++p) {
    const double mx = out.logits.row(p).maxCoeff();
    Eigen::VectorXd e = (out.logits.row(p).array() - mx).exp();
    out.probs.row(p) = e.transpose() / e.sum();
  }
  t.has_roi = true;
  return out;
}

void DetectorNet::backward(const ParamVector& params, const ForwardTrace& t,
                           const HeadGradients& grads, Eigen::VectorXd& grad) const {
  if (!t.has_backbone) throw ArchitectureError("backward: trace has no backbone activations");
  if (grad.size() != layout_->total())
    throw ArchitectureError("backward: gradient buffer has wrong size");
  const ParamLayout& L = *layout_;
  const int S = cfg_.image_size, S2 = S / 2, S4 = S / 4, G = cfg_.grid();
  const int A = cfg_.anchors_per_cell(), P = cfg_.roi_pool, C = cfg_.class_count;

  Eigen::MatrixXd dfeat3 = Eigen::MatrixXd::Zero(cfg_.c3, G * G);

  // ROI head.
  const int n = static_cast<int>(t.pooled.cols());
  if (t.has_roi && n > 0 && grads.d_cls_logits.size() > 0) {
    const Eigen::MatrixXd dcls = grads.d_cls_logits.transpose();  // (C+1) x n
    Eigen::MatrixXd ddel;
    if (grads.d_roi_deltas.size() > 0)
      ddel = grads.d_roi_deltas.transpose();  // 4C x n
    else
      ddel = Eigen::MatrixXd::Zero(4 * C, n);

    layout_view(L, grad, "roi_cls.w").noalias() += dcls * t.roi_hidden.transpose();
    layout_view(L, grad, "roi_cls.b").col(0) += dcls.rowwise().sum();
    layout_view(L, grad, "roi_delta.w").noalias() += ddel * t.roi_hidden.transpose();
    layout_view(L, grad, "roi_delta.b").col(0) += ddel.rowwise().sum();

    Eigen::MatrixXd dhidden = params.view("roi_cls.w").transpose() * dcls;
    dhidden.noalias() += params.view("roi_delta.w").transpose() * ddel;
    const Eigen::MatrixXd dpre = (t.roi_pre.array() > 0.0).select(dhidden, 0.0);

    layout_view(L, grad, "roi_fc1.w").noalias() += dpre * t.pooled.transpose();
    layout_view(L, grad, "roi_fc1.b").col(0) += dpre.rowwise().sum();
    const Eigen::MatrixXd dpooled = params.view("roi_fc1.w").transpose() * dpre;

    for (int p = 0; p < n; ++p)
      for (int b = 0; b < P * P; ++b) {
        const auto& s = t.pool_samples[static_cast<size_t>(p) * P * P + static_cast<size_t>(b)];
        for (int c = 0; c < cfg_.c3; ++c) {
          const double g = dpooled(c * P * P + b, p);
          if (g == 0.0) continue;
          for (int u = 0; u < 4; ++u) dfeat3(c, s.idx[u]) += s.w[u] * g;
        }
      }
  }

  // RPN heads.
  Eigen::MatrixXd dfeat4 = Eigen::MatrixXd::Zero(cfg_.c3, G * G);
  const bool has_obj = grads.d_objectness_logits.size() > 0;
  const bool has_rpn_delta = grads.d_rpn_deltas.size() > 0;
  if (has_obj || has_rpn_delta) {
    Eigen::MatrixXd dobj = Eigen::MatrixXd::Zero(A, G * G);
    Eigen::MatrixXd ddel = Eigen::MatrixXd::Zero(4 * A, G * G);
    for (int q = 0; q < G * G; ++q)
      for (int k = 0; k < A; ++k) {
        const int a = q * A + k;
        if (has_obj) dobj(k, q) = grads.d_objectness_logits(a);
        if (has_rpn_delta)
          for (int d = 0; d < 4; ++d) ddel(k * 4 + d, q) = grads.d_rpn_deltas(a, d);
      }
    layout_view(L, grad, "rpn_obj.w").noalias() += dobj * t.feat4.transpose();
    layout_view(L, grad, "rpn_obj.b").col(0) += dobj.rowwise().sum();
    layout_view(L, grad, "rpn_delta.w").noalias() += ddel * t.feat4.transpose();
    layout_view(L, grad, "rpn_delta.b").col(0) += ddel.rowwise().sum();
    dfeat4 = params.view("rpn_obj.w").transpose() * dobj;
    dfeat4.noalias() += params.view("rpn_delta.w").transpose() * ddel;
  }

  // RPN conv.
  {
    const Eigen::MatrixXd dpre4 = (t.pre4.array() > 0.0).select(dfeat4, 0.0);
    layout_view(L, grad, "rpn_conv.w").noalias() += dpre4 * t.cols4.transpose();
    layout_view(L, grad, "rpn_conv.b").col(0) += dpre4.rowwise().sum();
    const Eigen::MatrixXd dcols4 = params.view("rpn_conv.w").transpose() * dpre4;
    col2im3x3_add(dcols4, G, G, 1, G, G, dfeat3);
  }

  // Backbone.
  const Eigen::MatrixXd dpre3 = (t.pre3.array() > 0.0).select(dfeat3, 0.0);
  layout_view(L, grad, "conv3.w").noalias() += dpre3 * t.cols3.transpose();
  layout_view(L, grad, "conv3.b").col(0) += dpre3.rowwise().sum();
  Eigen::MatrixXd dfeat2 = Eigen::MatrixXd::Zero(cfg_.c2, S4 * S4);
  col2im3x3_add(params.view("conv3.w").transpose() * dpre3, S4, S4, 2, G, G, dfeat2);

  const Eigen::MatrixXd dpre2 = (t.pre2.array() > 0.0).select(dfeat2, 0.0);
  layout_view(L, grad, "conv2.w").noalias() += dpre2 * t.cols2.transpose();
  layout_view(L, grad, "conv2.b").col(0) += dpre2.rowwise().sum();
  Eigen::MatrixXd dfeat1 = Eigen::MatrixXd::Zero(cfg_.c1, S2 * S2);
  col2im3x3_add(params.view("conv2.w").transpose() * dpre2, S2, S2, 2, S4, S4, dfeat1);

  const Eigen::MatrixXd dpre1 = (t.pre1.array() > 0.0).select(dfeat1, 0.0);
  layout_view(L, grad, "conv1.w").noalias() += dpre1 * t.cols1.transpose();
  layout_view(L, grad, "conv1.b").col(0) += dpre1.rowwise().sum();
}

DetectionSet DetectorNet::predict(const ParamVector& params, const Image& image,
                                  double score_floor, double proposal_nms_iou) const {
  if (!(score_floor >= 0.0 && score_floor < 1.0))
    throw std::invalid_argument("predict: score_floor must lie in [0, 1)");
  if (!(proposal_nms_iou > 0.0 && proposal_nms_iou <= 1.0))
    throw std::invalid_argument("predict: nms_iou must lie in (0, 1]");

  const ProposalOutput props = forward_proposals(params, image);
  const int N = static_cast<int>(props.objectness.size());
  const double img_w = image.width, img_h = image.height;

  std::vector<int> order(static_cast<size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return props.objectness(a) > props.objectness(b);
  });
  const int pre = std::min(cfg_.pre_nms_top, N);

  std::vector<BoxD> cand;
  std::vector<double> cand_scores;
  cand.reserve(static_cast<size_t>(pre));
  for (int i = 0; i < pre; ++i) {
    const int a = order[static_cast<size_t>(i)];
    BoxD b = decode_box_delta(props.anchors[static_cast<size_t>(a)],
                              props.deltas.row(a).transpose(), cfg_.delta_clamp);
    cand.push_back(clip_box(b, img_w, img_h));
    cand_scores.push_back(props.objectness(a));
  }
  std::vector<int> kept = greedy_nms_indices(cand, cand_scores, proposal_nms_iou);
  if (static_cast<int>(kept.size()) > cfg_.topk_proposals) kept.resize(cfg_.topk_proposals);

  std::vector<BoxD> proposals;
  proposals.reserve(kept.size());
  for (int i : kept) proposals.push_back(cand[static_cast<size_t>(i)]);

  const RoiOutput rois = forward_roi(params, image, proposals);
  const int C = cfg_.class_count;

  DetectionSet dets;
  for (int p = 0; p < static_cast<int>(proposals.size()); ++p) {
    int best = 0;
    rois.probs.row(p).maxCoeff(&best);
    if (best == C) continue;  // background
    const double score = rois.probs(p, best);
    if (score < score_floor) continue;
    const Eigen::Vector4d d = rois.deltas.row(p).segment(4 * best, 4).transpose();
    BoxD box = clip_box(decode_box_delta(proposals[static_cast<size_t>(p)], d, cfg_.delta_clamp),
                        img_w, img_h);
    dets.push_back(LabeledBox{box, best, score});
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const LabeledBox& a, const LabeledBox& b) { return a.score > b.score; });
  return dets;
}

}  // namespace ssdet
