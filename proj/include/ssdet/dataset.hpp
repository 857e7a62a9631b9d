#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdet/image.hpp"

namespace ssdet {

/// Raised on malformed dataset files; the message names the offending record.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration of the synthetic imbalanced shapes dataset.
struct SyntheticConfig {
  int image_size = 64;
  int class_count = 6;
  std::vector<double> class_frequencies = {0.45, 0.25, 0.12, 0.08, 0.06, 0.04};
  int objects_min = 1;
  int objects_max = 4;
  int num_images = 1000;
  uint64_t seed = 0;

  /// Throws std::invalid_argument with a field-level message when invalid.
  void validate() const;
};

/// Renders num_images samples of filled geometric primitives on noise
/// backgrounds. One shape archetype per class, distinguished by geometry and
/// color; every emitted box tightly encloses its rasterized shape, lies in
/// bounds and has positive area. Deterministic given the seed; each image
/// draws from an independent stream derived from (seed, image index).
std::vector<ImageSample> generate_synthetic_dataset(const SyntheticConfig& cfg);

/// Uniformly samples round(fraction * N) images as the labeled set, seeded,
/// without replacement. The remainder become unlabeled with annotations
/// moved to the hidden diagnostics channel. Throws std::invalid_argument if
/// fraction is outside (0, 1] or rounds to zero labeled images.
DatasetSplit sample_labeled_split(const std::vector<ImageSample>& samples,
                                  double fraction, uint64_t seed);

/// Loads a COCO-style annotation file ("images", "annotations", "categories";
/// boxes as [x, y, w, h]). Pixel data is read from PPM files resolved
/// relative to the annotation file's directory. Boxes are converted to
/// corner form, clipped to image bounds, and category ids are remapped to a
/// contiguous [0, C) by ascending original id. Throws DataError on malformed
/// records or dangling references.
std::vector<ImageSample> load_coco_json(const std::string& path);

/// Class count implied by a COCO annotation file (its categories array).
int coco_class_count(const std::string& path);

/// Writes samples as <dir>/annotations.json plus one binary PPM per image.
/// The emitted schema is the same one load_coco_json accepts, so a write
/// followed by a load reproduces the dataset exactly (images are stored at
/// 8-bit depth; generated datasets are already quantized to 8-bit levels).
/// Returns the annotation file path.
std::string save_coco_dataset(const std::vector<ImageSample>& samples,
                              int class_count, const std::string& dir);

/// Binary PPM (P6), 8-bit. Round-trips exactly with quantize_8bit images.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

}  // namespace ssdet
