#include "ssdet/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ssdet {

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

namespace {

// AP for one class at one threshold, or nothing when the class has no gt.
std::optional<double> class_ap(const std::vector<DetectionSet>& preds,
                               const std::vector<std::vector<LabeledBox>>& gts,
                               int cls, double iou_thresh) {
  long total_gt = 0;
  for (const auto& g : gts)
    for (const auto& lb : g)
      if (lb.class_id == cls) ++total_gt;
  if (total_gt == 0) return std::nullopt;

  struct Pred {
    size_t image;
    size_t index;
    double score;
  };
  std::vector<Pred> ranked;
  for (size_t im = 0; im < preds.size(); ++im)
    for (size_t i = 0; i < preds[im].size(); ++i)
      if (preds[im][i].class_id == cls) ranked.push_back({im, i, preds[im][i].score});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Pred& a, const Pred& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> gt_used(gts.size());
  for (size_t im = 0; im < gts.size(); ++im) gt_used[im].assign(gts[im].size(), false);

  std::vector<double> precision, recall;
  long tp = 0, fp = 0;
  for (const auto& p : ranked) {
    const auto& box = preds[p.image][p.index].box;
    double best_iou = 0.0;
    int best_gt = -1;
    for (size_t g = 0; g < gts[p.image].size(); ++g) {
      const auto& gt = gts[p.image][g];
      if (gt.class_id != cls || gt_used[p.image][g]) continue;
      const double v = iou(box, gt.box);
      if (v >= iou_thresh && v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      gt_used[p.image][static_cast<size_t>(best_gt)] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(double(tp) / double(tp + fp));
    recall.push_back(double(tp) / double(total_gt));
  }

  // All-point interpolation: integrate recall steps against the running
  // precision envelope.
  double ap = 0.0;
  double envelope = 0.0;
  double prev_recall = recall.empty() ? 0.0 : recall.back();
  for (size_t i = precision.size(); i-- > 0;) {
    envelope = std::max(envelope, precision[i]);
    const double r_lo = (i == 0) ? 0.0 : recall[i - 1];
    ap += (recall[i] - r_lo) * envelope;
    prev_recall = recall[i];
  }
  (void)prev_recall;
  return ap;
}

}  // namespace

std::optional<double> average_precision(const std::vector<DetectionSet>& preds_per_image,
                                        const std::vector<std::vector<LabeledBox>>& gts_per_image,
                                        int class_count, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0))
    throw std::invalid_argument("average_precision: iou_thresh must lie in (0, 1]");
  if (preds_per_image.size() != gts_per_image.size())
    throw std::invalid_argument("average_precision: preds/gts image counts differ");
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < class_count; ++c) {
    const auto ap = class_ap(preds_per_image, gts_per_image, c, iou_thresh);
    if (ap) {
      sum += *ap;
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  return sum / present;
}

EvalReport map_50_95(const std::vector<DetectionSet>& preds_per_image,
                     const std::vector<std::vector<LabeledBox>>& gts_per_image,
                     int class_count) {
  EvalReport report;
  report.iou_thresholds = coco_iou_thresholds();
  report.per_class_ap.assign(static_cast<size_t>(class_count), std::nullopt);

  std::vector<std::vector<std::optional<double>>> per_class(
      static_cast<size_t>(class_count));
  bool any = false;
  for (double t : report.iou_thresholds) {
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < class_count; ++c) {
      const auto ap = class_ap(preds_per_image, gts_per_image, c, t);
      per_class[static_cast<size_t>(c)].push_back(ap);
      if (ap) {
        sum += *ap;
        ++present;
      }
    }
    if (present > 0) {
      report.ap_per_threshold.push_back(sum / present);
      any = true;
    } else {
      report.ap_per_threshold.push_back(0.0);
    }
  }
  if (!any) return report;  // defined stays false: no gt instances at all

  report.defined = true;
  report.map = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(),
                               0.0) /
               static_cast<double>(report.ap_per_threshold.size());
  for (int c = 0; c < class_count; ++c) {
    const auto& vals = per_class[static_cast<size_t>(c)];
    if (!vals.empty() && vals.front()) {
      double s = 0.0;
      for (const auto& v : vals) s += v.value_or(0.0);
      report.per_class_ap[static_cast<size_t>(c)] = s / static_cast<double>(vals.size());
    }
  }
  return report;
}

EvalReport evaluate_detector(const DetectorNet& net, const ParamVector& params,
                             const std::vector<ImageSample>& samples, double score_floor,
                             double proposal_nms_iou, double class_nms_iou) {
  std::vector<DetectionSet> preds;
  std::vector<std::vector<LabeledBox>> gts;
  preds.reserve(samples.size());
  gts.reserve(samples.size());
  for (const auto& s : samples) {
    preds.push_back(classwise_nms(net.predict(params, s.image, score_floor, proposal_nms_iou),
                                  class_nms_iou));
    gts.push_back(s.boxes);
  }
  return map_50_95(preds, gts, net.config().class_count);
}

std::pair<double, double> pseudo_accuracy_miou(const PseudoLabelSet& pseudo,
                                               const std::vector<LabeledBox>& gt_hidden,
                                               double match_iou) {
  if (pseudo.boxes.empty()) return {0.0, 0.0};
  const std::vector<int> matches = match_boxes(pseudo.boxes, gt_hidden, match_iou);
  long correct = 0;
  double iou_sum = 0.0;
  long matched = 0;
  for (size_t i = 0; i < matches.size(); ++i) {
    if (matches[i] == kNoMatch) continue;
    ++matched;
    const auto& gt = gt_hidden[static_cast<size_t>(matches[i])];
    iou_sum += iou(pseudo.boxes[i].box, gt.box);
    if (pseudo.boxes[i].class_id == gt.class_id) ++correct;
  }
  const double accuracy = double(correct) / double(pseudo.boxes.size());
  const double miou = matched > 0 ? iou_sum / double(matched) : 0.0;
  return {accuracy, miou};
}

PseudoDiagnostics compute_pseudo_diagnostics(
    const std::vector<PseudoLabelSet>& pseudo_sets,
    const std::vector<std::vector<LabeledBox>>& hidden_gts, int class_count,
    double match_iou) {
  if (pseudo_sets.size() != hidden_gts.size())
    throw std::invalid_argument("compute_pseudo_diagnostics: slice sizes differ");
  PseudoDiagnostics d;
  d.class_histogram.assign(static_cast<size_t>(class_count), 0);

  long total_pseudo = 0, correct = 0, matched = 0;
  double iou_sum = 0.0;
  for (size_t i = 0; i < pseudo_sets.size(); ++i) {
    const auto& ps = pseudo_sets[i];
    total_pseudo += static_cast<long>(ps.boxes.size());
    for (const auto& lb : ps.boxes)
      if (lb.class_id >= 0 && lb.class_id < class_count)
        ++d.class_histogram[static_cast<size_t>(lb.class_id)];
    const std::vector<int> matches = match_boxes(ps.boxes, hidden_gts[i], match_iou);
    for (size_t j = 0; j < matches.size(); ++j) {
      if (matches[j] == kNoMatch) continue;
      ++matched;
      const auto& gt = hidden_gts[i][static_cast<size_t>(matches[j])];
      iou_sum += iou(ps.boxes[j].box, gt.box);
      if (ps.boxes[j].class_id == gt.class_id) ++correct;
    }
  }
  d.pseudo_empty = total_pseudo == 0;
  d.accuracy = d.pseudo_empty ? 0.0 : double(correct) / double(total_pseudo);
  d.miou = matched > 0 ? iou_sum / double(matched) : 0.0;
  d.boxes_per_image =
      pseudo_sets.empty() ? 0.0 : double(total_pseudo) / double(pseudo_sets.size());
  return d;
}

double class_histogram_kl(const std::vector<long>& pseudo_hist,
                          const std::vector<long>& gt_hist, double epsilon,
                          KlDirection direction) {
  if (pseudo_hist.size() != gt_hist.size())
    throw std::invalid_argument("class_histogram_kl: histogram sizes differ");
  if (!(epsilon > 0.0)) throw std::invalid_argument("class_histogram_kl: epsilon must be > 0");
  long gt_total = 0;
  for (long v : gt_hist) gt_total += v;
  if (gt_total < 1) throw std::invalid_argument("class_histogram_kl: gt histogram is empty");

  const size_t n = gt_hist.size();
  auto normalize = [&](const std::vector<long>& h) {
    std::vector<double> p(n);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += double(h[i]) + epsilon;
    for (size_t i = 0; i < n; ++i) p[i] = (double(h[i]) + epsilon) / total;
    return p;
  };
  const std::vector<double> gt = normalize(gt_hist);
  const std::vector<double> ps = normalize(pseudo_hist);
  const auto& p = direction == KlDirection::kGtFirst ? gt : ps;
  const auto& q = direction == KlDirection::kGtFirst ? ps : gt;

  double kl = 0.0;
  for (size_t i = 0; i < n; ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

}  // namespace ssdet
