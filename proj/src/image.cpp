#include "ssdet/image.hpp"

#include <cmath>

namespace ssdet {

Image Image::filled(int width, int height, double value) {
  Image img;
  img.width = width;
  img.height = height;
  for (auto& c : img.ch) c = Eigen::ArrayXXd::Constant(height, width, value);
  return img;
}

Eigen::ArrayXXd luma(const Image& img) {
  return 0.299 * img.ch[0] + 0.587 * img.ch[1] + 0.114 * img.ch[2];
}

void clamp01(Image& img) {
  for (auto& c : img.ch) c = c.min(1.0).max(0.0);
}

void quantize_8bit(Image& img) {
  for (auto& c : img.ch)
    c = (c.min(1.0).max(0.0) * 255.0).round() / 255.0;
}

bool images_equal(const Image& a, const Image& b) {
  if (!a.same_shape(b)) return false;
  for (int c = 0; c < 3; ++c)
    if (!(a.ch[c] == b.ch[c]).all()) return false;
  return true;
}

}  // namespace ssdet
