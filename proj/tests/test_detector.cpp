#include <doctest.h>

#include <chrono>

#include "ssdet/detector.hpp"
#include "ssdet/losses.hpp"
#include "support/gradcheck.hpp"

using namespace ssdet;

namespace {

DetectorConfig small_config() {
  DetectorConfig cfg;
  cfg.image_size = 32;
  cfg.class_count = 3;
  cfg.c1 = 4;
  cfg.c2 = 6;
  cfg.c3 = 8;
  cfg.roi_fc_dim = 12;
  return cfg;
}

Image random_image(Rng& rng, int size) {
  Image img = Image::filled(size, size, 0.0);
  for (auto& c : img.ch)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) c(y, x) = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("forward_proposals is deterministic with in-range objectness") {
  const DetectorNet net(small_config());
  Rng rng(1);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(2);
  const Image img = random_image(img_rng, 32);

  const ProposalOutput a = net.forward_proposals(params, img);
  const ProposalOutput b = net.forward_proposals(params, img);
  CHECK(a.objectness == b.objectness);
  CHECK(a.deltas == b.deltas);
  CHECK(a.objectness.minCoeff() >= 0.0);
  CHECK(a.objectness.maxCoeff() <= 1.0);
  CHECK(a.objectness.size() == net.config().num_anchors());
  CHECK(static_cast<int>(a.anchors.size()) == net.config().num_anchors());
}

TEST_CASE("zero-initialized heads give the degenerate outputs") {
  const DetectorNet net(small_config());
  Rng rng(1);
  ParamVector params = net.init_params(rng);
  params.view("rpn_obj.w").setZero();
  params.view("rpn_obj.b").setZero();
  params.view("roi_cls.w").setZero();
  params.view("roi_cls.b").setZero();

  Rng img_rng(2);
  const Image img = random_image(img_rng, 32);
  const ProposalOutput props = net.forward_proposals(params, img);
  for (Eigen::Index i = 0; i < props.objectness.size(); ++i)
    CHECK(props.objectness(i) == 0.5);

  const RoiOutput rois = net.forward_roi(params, img, {BoxD{4, 4, 20, 20}, BoxD{0, 0, 8, 8}});
  const int C = net.config().class_count;
  for (Eigen::Index p = 0; p < rois.probs.rows(); ++p) {
    CHECK(rois.probs.row(p).sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (int j = 0; j <= C; ++j)
      CHECK(rois.probs(p, j) == doctest::Approx(1.0 / (C + 1)).epsilon(1e-12));
  }
}

TEST_CASE("roi probability rows sum to one") {
  const DetectorNet net(small_config());
  Rng rng(3);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(4);
  const Image img = random_image(img_rng, 32);
  const RoiOutput rois =
      net.forward_roi(params, img, {BoxD{2, 2, 12, 12}, BoxD{5, 9, 25, 22}, BoxD{0, 0, 31, 31}});
  for (Eigen::Index p = 0; p < rois.probs.rows(); ++p)
    CHECK(rois.probs.row(p).sum() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("forward_roi handles an empty proposal list") {
  const DetectorNet net(small_config());
  Rng rng(3);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(4);
  const Image img = random_image(img_rng, 32);
  const RoiOutput rois = net.forward_roi(params, img, {});
  CHECK(rois.probs.rows() == 0);
  CHECK(rois.deltas.rows() == 0);
  CHECK(rois.boxes.empty());
}

TEST_CASE("permuting proposals permutes roi rows identically") {
  const DetectorNet net(small_config());
  Rng rng(5);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(6);
  const Image img = random_image(img_rng, 32);

  const std::vector<BoxD> boxes = {BoxD{1, 1, 9, 9}, BoxD{10, 4, 28, 20}, BoxD{3, 15, 14, 30},
                                   BoxD{0, 0, 31, 31}};
  const std::vector<size_t> perm = {2, 0, 3, 1};
  std::vector<BoxD> permuted;
  for (size_t i : perm) permuted.push_back(boxes[i]);

  const RoiOutput base = net.forward_roi(params, img, boxes);
  const RoiOutput shuffled = net.forward_roi(params, img, permuted);
  for (size_t r = 0; r < perm.size(); ++r) {
    CHECK(shuffled.probs.row(static_cast<Eigen::Index>(r)) ==
          base.probs.row(static_cast<Eigen::Index>(perm[r])));
    CHECK(shuffled.deltas.row(static_cast<Eigen::Index>(r)) ==
          base.deltas.row(static_cast<Eigen::Index>(perm[r])));
  }
}

TEST_CASE("layout and image-size mismatches raise architecture errors") {
  const DetectorNet net(small_config());
  DetectorConfig other_cfg = small_config();
  other_cfg.c3 = 10;
  const DetectorNet other(other_cfg);
  Rng rng(1);
  const ParamVector params = other.init_params(rng);
  Rng img_rng(2);
  const Image img = random_image(img_rng, 32);
  CHECK_THROWS_AS(net.forward_proposals(params, img), ArchitectureError);

  const ParamVector ok = net.init_params(rng);
  const Image wrong_size = Image::filled(64, 64, 0.5);
  CHECK_THROWS_AS(net.forward_proposals(ok, wrong_size), ArchitectureError);
}

TEST_CASE("clone_params is value-equal and storage-independent") {
  const DetectorNet net(small_config());
  Rng rng(7);
  const ParamVector params = net.init_params(rng);
  ParamVector copy = clone_params(params);
  CHECK(copy.values == params.values);

  copy.values(3) += 1.0;
  CHECK(copy.values(3) != params.values(3));

  const ParamVector copy2 = clone_params(copy);
  ParamVector copy3 = clone_params(copy2);
  CHECK(copy3.values == copy.values);
}

TEST_CASE("box delta encode/decode round trip") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const BoxD anchor{rng.uniform(0, 20), rng.uniform(0, 20), 0, 0};
    BoxD a = anchor;
    a.x_max = a.x_min + rng.uniform(4, 16);
    a.y_max = a.y_min + rng.uniform(4, 16);
    BoxD target{rng.uniform(0, 20), rng.uniform(0, 20), 0, 0};
    target.x_max = target.x_min + rng.uniform(4, 16);
    target.y_max = target.y_min + rng.uniform(4, 16);
    const Eigen::Vector4d t = encode_box_delta(a, target);
    const BoxD back = decode_box_delta(a, t, 4.0);
    CHECK(back.x_min == doctest::Approx(target.x_min).epsilon(1e-9));
    CHECK(back.y_max == doctest::Approx(target.y_max).epsilon(1e-9));
  }
}

TEST_CASE("hand-crafted net recovers a known box") {
  // The backbone is wired as a brightness probe (channel 0 averages the
  // input), the objectness head fires on bright cells for the square
  // anchor, and the classifier is a constant class-1 vote. A white square
  // aligned with an anchor must come back as the top detection.
  DetectorConfig cfg;  // default 64x64, C=6, aspects {0.5, 1, 2}
  const DetectorNet net(cfg);
  ParamVector p = net.zero_params();
  p.view("conv1.w").row(0).setConstant(1.0 / 27.0);
  p.view("conv2.w")(0, 4) = 1.0;   // center tap of channel 0
  p.view("conv3.w")(0, 4) = 1.0;
  p.view("rpn_conv.w")(0, 4) = 1.0;
  p.view("rpn_obj.w")(1, 0) = 10.0;  // aspect-1 anchor reads channel 0
  p.view("rpn_obj.b").setConstant(-5.0);
  p.view("roi_cls.b")(1, 0) = 5.0;

  const BoxD target{18, 18, 38, 38};  // anchor box of the aspect-1 anchor at cell (3,3)
  Image img = Image::filled(64, 64, 0.0);
  for (int y = 18; y < 38; ++y)
    for (int x = 18; x < 38; ++x)
      for (auto& c : img.ch) c(y, x) = 1.0;

  const DetectionSet dets = net.predict(p, img, 0.5, 0.7);
  REQUIRE_FALSE(dets.empty());
  CHECK(dets[0].class_id == 1);
  double best = 0.0;
  for (const auto& d : dets) best = std::max(best, iou(d.box, target));
  CHECK(best >= 0.8);
  CHECK(iou(dets[0].box, target) >= 0.8);
}

TEST_CASE("predict output is score-sorted and floor-filtered") {
  const DetectorNet net(small_config());
  Rng rng(13);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(14);
  const Image img = random_image(img_rng, 32);

  const DetectionSet dets = net.predict(params, img, 0.05, 0.7);
  for (size_t i = 1; i < dets.size(); ++i) CHECK(dets[i - 1].score >= dets[i].score);
  for (const auto& d : dets) {
    CHECK(d.score >= 0.05);
    CHECK(d.box.x_min >= 0.0);
    CHECK(d.box.x_max <= 32.0);
  }

  // A floor near 1 on an untrained net leaves nothing.
  const DetectionSet none = net.predict(params, img, 1.0 - 1e-9, 0.7);
  CHECK(none.empty());
}

TEST_CASE("analytic gradients match finite differences") {
  const DetectorNet net(small_config());
  Rng rng(21);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(22);
  const Image img = random_image(img_rng, 32);
  const std::vector<LabeledBox> gt = {LabeledBox{BoxD{4, 6, 18, 20}, 1, 1.0},
                                      LabeledBox{BoxD{18, 14, 30, 28}, 2, 1.0}};
  LossConfig loss_cfg;

  const auto result = testsupport::gradient_check(net, params, img, gt, loss_cfg,
                                                  /*sample_seed=*/5, /*supervised=*/true,
                                                  /*n_coords=*/150, /*coord_seed=*/77);
  INFO("worst relative error: ", result.worst);
  CHECK(result.passed >= result.checked - 1);
}

TEST_CASE("forward+backward on a 64x64 image stays under 50 ms") {
  DetectorConfig cfg;  // default architecture
  const DetectorNet net(cfg);
  Rng rng(31);
  const ParamVector params = net.init_params(rng);
  Rng img_rng(32);
  const Image img = random_image(img_rng, 64);
  const std::vector<LabeledBox> gt = {LabeledBox{BoxD{10, 10, 30, 30}, 0, 1.0}};
  LossConfig loss_cfg;
  Eigen::VectorXd grad;

  // Warm up once, then time.
  testsupport::detection_total_loss(net, params, img, gt, loss_cfg, 1, true, &grad);
  const auto start = std::chrono::steady_clock::now();
  const int reps = 5;
  for (int i = 0; i < reps; ++i)
    testsupport::detection_total_loss(net, params, img, gt, loss_cfg, 1, true, &grad);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count() /
                    reps;
  INFO("forward+backward: ", ms, " ms");
#ifdef NDEBUG
  CHECK(ms < 50.0);
#endif
}
