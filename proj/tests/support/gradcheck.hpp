#pragma once

// Shared between the unit tests and the acceptance suite: evaluates the
// detector loss as a plain function of the parameter vector and compares
// analytic gradients against central finite differences. The finite
// difference is the independent oracle here; it never touches backward().

#include <Eigen/Core>
#include <cmath>

#include "ssdet/detector.hpp"
#include "ssdet/losses.hpp"

namespace ssdet::testsupport {

inline double detection_total_loss(const DetectorNet& net, const ParamVector& params,
                                   const Image& image, const std::vector<LabeledBox>& targets,
                                   const LossConfig& loss_cfg, uint64_t sample_seed,
                                   bool supervised, Eigen::VectorXd* grad_out = nullptr) {
  ForwardTrace trace;
  const ProposalOutput props = net.forward_proposals(params, image, &trace);
  const std::vector<BoxD> roi_boxes = make_roi_training_boxes(
      net.anchors(), targets, image.width, image.height, loss_cfg, sample_seed);
  const RoiOutput rois = net.forward_roi(params, image, roi_boxes, &trace);
  HeadGradients hg;
  const LossBreakdown b =
      supervised ? supervised_loss(props, rois, targets, loss_cfg, sample_seed, &hg)
                 : unsupervised_loss(props, rois, targets, loss_cfg, sample_seed, &hg);
  if (grad_out) {
    grad_out->setZero(net.layout()->total());
    net.backward(params, trace, hg, *grad_out);
  }
  return b.total;
}

struct GradCheckResult {
  int checked = 0;
  int passed = 0;
  double worst = 0.0;
};

/// Compares analytic d(loss)/d(theta_j) with a central difference at
/// n_coords seeded coordinate choices. rel error uses max(|a|, |fd|, floor)
/// as the denominator so that genuinely-zero coordinates pass.
inline GradCheckResult gradient_check(const DetectorNet& net, const ParamVector& params,
                                      const Image& image,
                                      const std::vector<LabeledBox>& targets,
                                      const LossConfig& loss_cfg, uint64_t sample_seed,
                                      bool supervised, int n_coords, uint64_t coord_seed) {
  Eigen::VectorXd grad;
  detection_total_loss(net, params, image, targets, loss_cfg, sample_seed, supervised, &grad);

  GradCheckResult result;
  Rng rng(coord_seed);
  ParamVector probe = clone_params(params);
  for (int i = 0; i < n_coords; ++i) {
    const Eigen::Index j = rng.uniform_int(static_cast<int>(params.values.size()));
    const double eps = 1e-5 * std::max(1.0, std::abs(params.values(j)));
    const double saved = probe.values(j);
    probe.values(j) = saved + eps;
    const double up =
        detection_total_loss(net, probe, image, targets, loss_cfg, sample_seed, supervised);
    probe.values(j) = saved - eps;
    const double down =
        detection_total_loss(net, probe, image, targets, loss_cfg, sample_seed, supervised);
    probe.values(j) = saved;

    const double fd = (up - down) / (2.0 * eps);
    const double a = grad(j);
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
    const double rel = std::abs(a - fd) / denom;
    ++result.checked;
    if (rel <= 1e-3) ++result.passed;
    result.worst = std::max(result.worst, rel);
  }
  return result;
}

}  // namespace ssdet::testsupport
