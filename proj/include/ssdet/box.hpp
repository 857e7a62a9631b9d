#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

namespace ssdet {

/// Axis-aligned box in corner form, continuous pixel coordinates.
/// Invariant: x_min <= x_max, y_min <= y_max, all coordinates finite.
/// Zero-area boxes are legal values; geometry functions treat them as
/// having IoU 0 against everything.
template <typename Scalar>
struct Box {
  Scalar x_min{0}, y_min{0}, x_max{0}, y_max{0};

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return width() * height(); }
  Scalar center_x() const { return (x_min + x_max) / Scalar(2); }
  Scalar center_y() const { return (y_min + y_max) / Scalar(2); }

  bool valid() const {
    return std::isfinite(double(x_min)) && std::isfinite(double(y_min)) &&
           std::isfinite(double(x_max)) && std::isfinite(double(y_max)) &&
           x_min <= x_max && y_min <= y_max;
  }

  friend bool operator==(const Box& a, const Box& b) {
    return a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max &&
           a.y_max == b.y_max;
  }
};

using BoxD = Box<double>;

/// Box plus class identity and confidence. Ground truth carries score 1.0.
struct LabeledBox {
  BoxD box;
  int class_id = 0;
  double score = 1.0;
};

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  return w * h;
}

/// Intersection over union. Returns 0 when the union has zero area.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= Scalar(0)) return Scalar(0);
  return inter / uni;
}

/// Matrix of pairwise IoU values, entry (i, j) = iou(as[i], bs[j]).
inline Eigen::MatrixXd pairwise_iou(const std::vector<BoxD>& as,
                                    const std::vector<BoxD>& bs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(as.size()),
                    static_cast<Eigen::Index>(bs.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = iou(as[static_cast<size_t>(i)], bs[static_cast<size_t>(j)]);
  return m;
}

/// Clamps a box to [0, width] x [0, height]. May produce a zero-area box.
template <typename Scalar>
Box<Scalar> clip_box(const Box<Scalar>& b, Scalar width, Scalar height) {
  auto clamp = [](Scalar v, Scalar hi) { return std::clamp(v, Scalar(0), hi); };
  return Box<Scalar>{clamp(b.x_min, width), clamp(b.y_min, height),
                     clamp(b.x_max, width), clamp(b.y_max, height)};
}

constexpr int kNoMatch = -1;

/// Greedy score-descending matching of predictions to ground truth.
///
/// Predictions are visited in descending score order (ties broken by the
/// lower original index); each takes the still-unmatched ground truth of
/// highest IoU provided that IoU >= iou_thresh. Returns, per prediction in
/// the original order, the matched gt index or kNoMatch. Class labels are
/// ignored here; callers that need class-aware matching filter first or
/// compare labels on the result.
std::vector<int> match_boxes(const std::vector<LabeledBox>& preds,
                             const std::vector<LabeledBox>& gts,
                             double iou_thresh);

}  // namespace ssdet
