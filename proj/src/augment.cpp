#include "ssdet/augment.hpp"

#include <cmath>
#include <numbers>

namespace ssdet {

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.flip_prob = 0.0;
  cfg.color_jitter_prob = 0.0;
  cfg.grayscale_prob = 0.0;
  cfg.blur_prob = 0.0;
  for (auto& c : cfg.cutouts) c.prob = 0.0;
  return cfg;
}

AugmentedPair flip_horizontal(const ImageSample& sample) {
  AugmentedPair out;
  out.image = sample.image;
  for (auto& c : out.image.ch) c = c.rowwise().reverse().eval();
  const double w = sample.image.width;
  out.boxes = sample.boxes;
  for (auto& lb : out.boxes) {
    const double x0 = lb.box.x_min, x1 = lb.box.x_max;
    lb.box.x_min = w - x1;
    lb.box.x_max = w - x0;
  }
  return out;
}

AugmentedPair weak_augment(const ImageSample& sample, const AugmentConfig& cfg, Rng& rng) {
  if (rng.bernoulli(cfg.flip_prob)) return flip_horizontal(sample);
  return AugmentedPair{sample.image, sample.boxes};
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& c : out.ch) c *= factor;
  clamp01(out);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  const double mean = luma(img).mean();
  Image out = img;
  for (auto& c : out.ch) c = factor * c + (1.0 - factor) * mean;
  clamp01(out);
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  const Eigen::ArrayXXd gray = luma(img);
  Image out = img;
  for (auto& c : out.ch) c = factor * c + (1.0 - factor) * gray;
  clamp01(out);
  return out;
}

Image shift_hue(const Image& img, double shift) {
  // Rotation of RGB about the gray axis; a standard approximation that
  // avoids a full HSV round trip on synthetic imagery.
  const double theta = 2.0 * std::numbers::pi * shift;
  const double c = std::cos(theta), s = std::sin(theta);
  const double one_third = 1.0 / 3.0;
  const double root = std::sqrt(one_third);
  double m[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double base = one_third * (1.0 - c);
      m[i][j] = base + (i == j ? c : 0.0);
    }
  m[0][1] += -root * s;
  m[0][2] += root * s;
  m[1][0] += root * s;
  m[1][2] += -root * s;
  m[2][0] += -root * s;
  m[2][1] += root * s;

  Image out = img;
  for (int i = 0; i < 3; ++i)
    out.ch[static_cast<size_t>(i)] =
        m[i][0] * img.ch[0] + m[i][1] * img.ch[1] + m[i][2] * img.ch[2];
  clamp01(out);
  return out;
}

Image to_grayscale(const Image& img) {
  const Eigen::ArrayXXd gray = luma(img);
  Image out = img;
  for (auto& c : out.ch) c = gray;
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::ArrayXd kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel(i + radius) = std::exp(-0.5 * (i * i) / (sigma * sigma));
  kernel /= kernel.sum();

  const int H = img.height, W = img.width;
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
  };

  Image out = img;
  for (auto& plane : out.ch) {
    Eigen::ArrayXXd tmp(H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel(k + radius) * plane(y, reflect(x + k, W));
        tmp(y, x) = acc;
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel(k + radius) * tmp(reflect(y + k, H), x);
        plane(y, x) = acc;
      }
  }
  clamp01(out);
  return out;
}

Image apply_cutout(const Image& image, Rng& rng, double scale_min, double scale_max,
                   double ratio_min, double ratio_max, double fill) {
  const int H = image.height, W = image.width;
  const double total = static_cast<double>(H) * W;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area = rng.uniform(scale_min, scale_max) * total;
    const double ratio = std::exp(rng.uniform(std::log(ratio_min), std::log(ratio_max)));
    const int h = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int w = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (h <= 0 || w <= 0 || h > H || w > W) continue;
    const int y0 = rng.uniform_int(H - h + 1);
    const int x0 = rng.uniform_int(W - w + 1);
    Image out = image;
    for (auto& c : out.ch) c.block(y0, x0, h, w).setConstant(fill);
    return out;
  }
  return image;
}

Image strong_augment(const Image& image, const AugmentConfig& cfg, Rng& rng) {
  Image out = image;
  if (rng.bernoulli(cfg.color_jitter_prob)) {
    out = adjust_brightness(out, rng.uniform(cfg.jitter_factor_min, cfg.jitter_factor_max));
    out = adjust_contrast(out, rng.uniform(cfg.jitter_factor_min, cfg.jitter_factor_max));
    out = adjust_saturation(out, rng.uniform(cfg.jitter_factor_min, cfg.jitter_factor_max));
    out = shift_hue(out, rng.uniform(-cfg.hue_shift_max, cfg.hue_shift_max));
  }
  if (rng.bernoulli(cfg.grayscale_prob)) out = to_grayscale(out);
  if (rng.bernoulli(cfg.blur_prob))
    out = gaussian_blur(out, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
  for (const auto& pat : cfg.cutouts)
    if (rng.bernoulli(pat.prob))
      out = apply_cutout(out, rng, pat.scale_min, pat.scale_max, pat.ratio_min,
                         pat.ratio_max, cfg.cutout_fill);
  return out;
}

}  // namespace ssdet
