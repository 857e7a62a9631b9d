#pragma once

#include <array>

#include "ssdet/image.hpp"
#include "ssdet/rng.hpp"

namespace ssdet {

struct CutoutPattern {
  double prob = 0.0;
  double scale_min = 0.0, scale_max = 0.0;  // erased-area fraction range
  double ratio_min = 1.0, ratio_max = 1.0;  // aspect ratio range
};

/// Probabilities and ranges of the weak and strong pipelines. Defaults are
/// the standard recipe this trainer ships with; every field is exposed in
/// the run config.
struct AugmentConfig {
  double flip_prob = 0.5;

  double color_jitter_prob = 0.8;
  double jitter_factor_min = 0.6, jitter_factor_max = 1.4;
  double hue_shift_max = 0.1;

  double grayscale_prob = 0.2;

  double blur_prob = 0.5;
  double blur_sigma_min = 0.1, blur_sigma_max = 2.0;

  std::array<CutoutPattern, 3> cutouts = {{
      {0.7, 0.05, 0.2, 0.3, 3.3},
      {0.5, 0.02, 0.2, 0.1, 6.0},
      {0.3, 0.02, 0.2, 0.05, 8.0},
  }};
  double cutout_fill = 0.5;

  /// Test hook: all probabilities forced to zero, making both pipelines the
  /// identity map.
  static AugmentConfig disabled();
};

/// Image + (possibly transformed) boxes after a geometric-capable pipeline.
struct AugmentedPair {
  Image image;
  std::vector<LabeledBox> boxes;
};

/// Mirrors the image left-right and reflects every box x-range.
AugmentedPair flip_horizontal(const ImageSample& sample);

/// Weak pipeline: horizontal flip with cfg.flip_prob, otherwise identity.
AugmentedPair weak_augment(const ImageSample& sample, const AugmentConfig& cfg, Rng& rng);

/// Strong pipeline, photometric only, applied in order: color jitter,
/// grayscale, Gaussian blur, three cutout patterns. Pixel values are
/// clamped to [0, 1]; geometry (and therefore any box list held alongside
/// the image) is never touched.
Image strong_augment(const Image& image, const AugmentConfig& cfg, Rng& rng);

/// Erases one rectangle with area fraction in scale range and aspect ratio
/// in ratio range, fully inside the image, filled with `fill`. Returns the
/// input unchanged if no valid rectangle is found within a bounded number
/// of proposal attempts.
Image apply_cutout(const Image& image, Rng& rng, double scale_min, double scale_max,
                   double ratio_min, double ratio_max, double fill);

// Individual photometric ops (building blocks of strong_augment).
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image shift_hue(const Image& img, double shift);  // shift in [-0.5, 0.5] turns
Image to_grayscale(const Image& img);
Image gaussian_blur(const Image& img, double sigma);

}  // namespace ssdet
