#include <doctest.h>

#include <cmath>

#include "ssdet/evalmetrics.hpp"
#include "ssdet/rng.hpp"
#include "support/ap_oracle.hpp"

using namespace ssdet;

namespace {

std::vector<std::vector<LabeledBox>> one_image_gts(std::vector<LabeledBox> boxes) {
  return {std::move(boxes)};
}

LabeledBox lb(double x, double y, double s, int cls, double score = 1.0) {
  return LabeledBox{BoxD{x, y, x + s, y + s}, cls, score};
}

std::pair<std::vector<DetectionSet>, std::vector<std::vector<LabeledBox>>> random_instance(
    Rng& rng, int images, int max_boxes, int classes) {
  std::vector<DetectionSet> preds(static_cast<size_t>(images));
  std::vector<std::vector<LabeledBox>> gts(static_cast<size_t>(images));
  for (int im = 0; im < images; ++im) {
    const int ng = 1 + rng.uniform_int(max_boxes);
    for (int g = 0; g < ng; ++g) {
      const double x = rng.uniform(0, 20), y = rng.uniform(0, 20);
      gts[static_cast<size_t>(im)].push_back(
          LabeledBox{BoxD{x, y, x + rng.uniform(3, 10), y + rng.uniform(3, 10)},
                     rng.uniform_int(classes), 1.0});
    }
    const int np = rng.uniform_int(max_boxes + 1);
    for (int p = 0; p < np; ++p) {
      // Half the predictions perturb a gt box, half are wild.
      if (rng.bernoulli(0.5) && !gts[static_cast<size_t>(im)].empty()) {
        const auto& base =
            gts[static_cast<size_t>(im)][static_cast<size_t>(rng.uniform_int(ng))];
        BoxD box = base.box;
        const double w = box.width();
        box.x_min += rng.uniform(-0.2, 0.2) * w;
        box.x_max += rng.uniform(-0.2, 0.2) * w;
        box.y_min += rng.uniform(-0.2, 0.2) * w;
        box.y_max += rng.uniform(-0.2, 0.2) * w;
        if (box.x_min > box.x_max) std::swap(box.x_min, box.x_max);
        if (box.y_min > box.y_max) std::swap(box.y_min, box.y_max);
        preds[static_cast<size_t>(im)].push_back(
            LabeledBox{box, rng.bernoulli(0.8) ? base.class_id : rng.uniform_int(classes),
                       rng.uniform()});
      } else {
        const double x = rng.uniform(0, 20), y = rng.uniform(0, 20);
        preds[static_cast<size_t>(im)].push_back(
            LabeledBox{BoxD{x, y, x + rng.uniform(3, 10), y + rng.uniform(3, 10)},
                       rng.uniform_int(classes), rng.uniform()});
      }
    }
  }
  return {preds, gts};
}

}  // namespace

TEST_CASE("average precision endpoint cases") {
  const auto gts = one_image_gts({lb(2, 2, 6, 0), lb(12, 4, 5, 1)});

  SUBCASE("perfect detector scores 1") {
    std::vector<DetectionSet> preds = {
        {LabeledBox{gts[0][0].box, 0, 1.0}, LabeledBox{gts[0][1].box, 1, 1.0}}};
    CHECK(*average_precision(preds, gts, 2, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    const EvalReport report = map_50_95(preds, gts, 2);
    CHECK(report.defined);
    CHECK(report.map == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.ap_per_threshold.size() == 10);
  }
  SUBCASE("no predictions scores 0") {
    std::vector<DetectionSet> preds = {{}};
    CHECK(*average_precision(preds, gts, 2, 0.5) == 0.0);
  }
  SUBCASE("no ground truth at all reports absent") {
    std::vector<DetectionSet> preds = {{lb(0, 0, 5, 0, 0.9)}};
    const std::vector<std::vector<LabeledBox>> empty_gts = {{}};
    CHECK_FALSE(average_precision(preds, empty_gts, 2, 0.5).has_value());
    CHECK_FALSE(map_50_95(preds, empty_gts, 2).defined);
  }
}

TEST_CASE("mAP is never above AP50") {
  Rng rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    auto [preds, gts] = random_instance(rng, 2, 4, 2);
    const EvalReport report = map_50_95(preds, gts, 2);
    if (!report.defined) continue;
    CHECK(report.map <= report.ap_per_threshold.front() + 1e-12);
  }
}

TEST_CASE("map_50_95 matches the brute-force PR oracle") {
  Rng rng(82);
  for (int trial = 0; trial < 60; ++trial) {
    auto [preds, gts] = random_instance(rng, 2, 4, 2);
    const EvalReport report = map_50_95(preds, gts, 2);
    double oracle_sum = 0.0;
    bool any = false;
    for (size_t t = 0; t < report.iou_thresholds.size(); ++t) {
      const auto oracle =
          testsupport::oracle_macro_ap(preds, gts, 2, report.iou_thresholds[t]);
      if (oracle) {
        any = true;
        CHECK(std::abs(report.ap_per_threshold[t] - *oracle) < 1e-9);
        oracle_sum += *oracle;
      }
    }
    if (any) CHECK(std::abs(report.map - oracle_sum / 10.0) < 1e-9);
  }
}

TEST_CASE("average precision is permutation invariant") {
  Rng rng(83);
  auto [preds, gts] = random_instance(rng, 3, 4, 2);
  const auto base = average_precision(preds, gts, 2, 0.5);
  for (auto& image_preds : preds)
    std::reverse(image_preds.begin(), image_preds.end());
  const auto reversed = average_precision(preds, gts, 2, 0.5);
  CHECK(base.has_value() == reversed.has_value());
  if (base) CHECK(*base == doctest::Approx(*reversed).epsilon(1e-12));
}

TEST_CASE("duplicating a matched true positive never increases AP") {
  Rng rng(84);
  for (int trial = 0; trial < 40; ++trial) {
    auto [preds, gts] = random_instance(rng, 2, 3, 2);
    const auto base = average_precision(preds, gts, 2, 0.5);
    if (!base) continue;
    // Duplicate the highest-scoring prediction of image 0, if any.
    if (preds[0].empty()) continue;
    preds[0].push_back(preds[0][0]);
    const auto bumped = average_precision(preds, gts, 2, 0.5);
    CHECK(*bumped <= *base + 1e-12);
  }
}

TEST_CASE("pseudo accuracy and miou") {
  PseudoLabelSet pseudo;
  const std::vector<LabeledBox> gt = {lb(2, 2, 8, 0), lb(14, 6, 6, 1)};

  SUBCASE("exact pseudo labels score perfectly") {
    pseudo.boxes = gt;
    const auto [acc, miou] = pseudo_accuracy_miou(pseudo, gt, 0.5);
    CHECK(acc == 1.0);
    CHECK(miou == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("disjoint pseudo labels score zero") {
    pseudo.boxes = {lb(30, 30, 5, 0, 0.9)};
    const auto [acc, miou] = pseudo_accuracy_miou(pseudo, gt, 0.5);
    CHECK(acc == 0.0);
    CHECK(miou == 0.0);
  }
  SUBCASE("mixed three-box fixture matches hand counts") {
    // Box 1: matches gt0 with IoU 1, correct class.
    // Box 2: overlaps gt1 (IoU = 36/72 = 0.5), wrong class.
    // Box 3: matches nothing.
    pseudo.boxes = {lb(2, 2, 8, 0, 0.9), LabeledBox{BoxD{14, 6, 20, 18}, 0, 0.8},
                    lb(40, 40, 5, 1, 0.7)};
    const auto [acc, miou] = pseudo_accuracy_miou(pseudo, gt, 0.5);
    CHECK(acc == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(miou == doctest::Approx((1.0 + 0.5) / 2.0).epsilon(1e-12));
  }
  SUBCASE("empty pseudo set reports the emptiness flag") {
    const PseudoDiagnostics d = compute_pseudo_diagnostics({PseudoLabelSet{}}, {gt}, 2, 0.5);
    CHECK(d.pseudo_empty);
    CHECK(d.accuracy == 0.0);
    CHECK(d.boxes_per_image == 0.0);
  }
}

TEST_CASE("histogram KL divergence") {
  SUBCASE("identical histograms give zero") {
    CHECK(class_histogram_kl({5, 3, 2}, {5, 3, 2}, 1e-6) <= 1e-12);
  }
  SUBCASE("zero-count class matches the direct formula") {
    const std::vector<long> pseudo = {10, 0, 5};
    const std::vector<long> gt = {8, 4, 3};
    const double eps = 1e-6;
    auto norm = [&](const std::vector<long>& h, size_t i) {
      double total = 0.0;
      for (long v : h) total += double(v) + eps;
      return (double(h[i]) + eps) / total;
    };
    double expected = 0.0;
    for (size_t i = 0; i < 3; ++i) {
      const double p = norm(gt, i), q = norm(pseudo, i);
      expected += p * std::log(p / q);
    }
    const double got = class_histogram_kl(pseudo, gt, eps);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("KL is nonnegative on random histograms") {
    Rng rng(85);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<long> a(4), b(4);
      for (size_t i = 0; i < 4; ++i) {
        a[i] = rng.uniform_int(20);
        b[i] = rng.uniform_int(20);
      }
      if (b[0] + b[1] + b[2] + b[3] == 0) b[0] = 1;
      CHECK(class_histogram_kl(a, b, 1e-6) >= -1e-14);
    }
  }
  SUBCASE("direction flag swaps the arguments") {
    const std::vector<long> pseudo = {10, 0, 5};
    const std::vector<long> gt = {8, 4, 3};
    const double forward = class_histogram_kl(pseudo, gt, 1e-6, KlDirection::kGtFirst);
    const double reverse = class_histogram_kl(gt, pseudo, 1e-6, KlDirection::kPseudoFirst);
    CHECK(forward == doctest::Approx(reverse).epsilon(1e-12));
  }
  SUBCASE("empty gt histogram is rejected") {
    CHECK_THROWS_AS(class_histogram_kl({1, 2}, {0, 0}, 1e-6), std::invalid_argument);
  }
}
