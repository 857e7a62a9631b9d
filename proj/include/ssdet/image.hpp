#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "ssdet/box.hpp"

namespace ssdet {

/// Dense RGB image, values in [0, 1]. Channel planes are indexed (y, x).
struct Image {
  int width = 0;
  int height = 0;
  std::array<Eigen::ArrayXXd, 3> ch;

  static Image filled(int width, int height, double value);

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

/// Luma plane (Rec.601 weights), used by grayscale and contrast transforms.
Eigen::ArrayXXd luma(const Image& img);

/// Clamps all channels into [0, 1] in place.
void clamp01(Image& img);

/// Rounds every pixel to the nearest 8-bit level k/255. Generated datasets
/// are stored at 8-bit depth so that image files round-trip exactly.
void quantize_8bit(Image& img);

bool images_equal(const Image& a, const Image& b);

/// One image with its annotations. Unlabeled samples carry is_labeled=false
/// and an empty box list; their hidden ground truth, when retained at all,
/// lives in DatasetSplit::unlabeled_hidden_gt, never here.
struct ImageSample {
  Image image;
  std::vector<LabeledBox> boxes;
  bool is_labeled = true;
};

/// A labeled/unlabeled partition of a dataset.
///
/// unlabeled_hidden_gt is parallel to unlabeled and exists only so that
/// pseudo-label quality can be scored against ground truth. Training code
/// must never read it; the trainer tests poison it and assert no effect.
struct DatasetSplit {
  std::vector<ImageSample> labeled;
  std::vector<ImageSample> unlabeled;
  std::vector<std::vector<LabeledBox>> unlabeled_hidden_gt;
  int class_count = 0;
  uint64_t seed = 0;
};

}  // namespace ssdet
