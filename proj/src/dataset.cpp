#include "ssdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ssdet/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssdet {

void SyntheticConfig::validate() const {
  if (image_size < 16) throw std::invalid_argument("synthetic.image_size: must be >= 16");
  if (class_count < 2)
    throw std::invalid_argument("synthetic.class_count: imbalance study requires >= 2 classes");
  if (class_count > 6)
    throw std::invalid_argument("synthetic.class_count: only 6 shape archetypes available");
  if (static_cast<int>(class_frequencies.size()) != class_count)
    throw std::invalid_argument("synthetic.class_frequencies: length must equal class_count");
  double sum = 0.0;
  for (double f : class_frequencies) {
    if (f < 0.0) throw std::invalid_argument("synthetic.class_frequencies: entries must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("synthetic.class_frequencies: must sum to 1");
  if (objects_min < 0 || objects_max < objects_min)
    throw std::invalid_argument("synthetic.objects_per_image: need 0 <= min <= max");
  if (num_images < 1) throw std::invalid_argument("synthetic.num_images: must be >= 1");
}

namespace {

struct ShapeStyle {
  double r, g, b;
};

// One archetype per class: disk, triangle, square, ring, wide ellipse, cross.
constexpr ShapeStyle kStyles[6] = {
    {0.85, 0.15, 0.15}, {0.15, 0.75, 0.20}, {0.20, 0.35, 0.90},
    {0.92, 0.85, 0.15}, {0.85, 0.20, 0.80}, {0.15, 0.85, 0.85},
};

bool inside_shape(int cls, double dx, double dy, double s) {
  const double half = s / 2.0;
  switch (cls) {
    case 0:  // disk
      return dx * dx + dy * dy <= half * half;
    case 1: {  // upward isoceles triangle
      const double h = 0.92 * s;
      const double ty = dy + h / 2.0;  // 0 at apex, h at base
      if (ty < 0.0 || ty > h) return false;
      return std::abs(dx) <= half * (ty / h);
    }
    case 2:  // square
      return std::abs(dx) <= half && std::abs(dy) <= half;
    case 3: {  // ring
      const double d2 = dx * dx + dy * dy;
      const double ri = 0.55 * half;
      return d2 <= half * half && d2 >= ri * ri;
    }
    case 4: {  // wide 2:1 ellipse
      const double a = half, b = half / 2.0;
      const double u = dx / a, v = dy / b;
      return u * u + v * v <= 1.0;
    }
    default: {  // cross
      const double t = 0.34 * s / 2.0;
      return (std::abs(dx) <= t && std::abs(dy) <= half) ||
             (std::abs(dy) <= t && std::abs(dx) <= half);
    }
  }
}

int sample_class(const std::vector<double>& freqs, Rng& rng) {
  double u = rng.uniform();
  for (size_t c = 0; c < freqs.size(); ++c) {
    u -= freqs[c];
    if (u < 0.0) return static_cast<int>(c);
  }
  return static_cast<int>(freqs.size()) - 1;
}

ImageSample render_image(const SyntheticConfig& cfg, uint64_t image_index) {
  Rng rng(mix_seed({cfg.seed, 0x5a11e7ULL, image_index}));
  const int S = cfg.image_size;

  ImageSample sample;
  sample.is_labeled = true;
  sample.image = Image::filled(S, S, 0.0);

  const double base = rng.uniform(0.15, 0.45);
  double tint[3];
  for (double& t : tint) t = rng.uniform(-0.04, 0.04);
  for (int c = 0; c < 3; ++c) sample.image.ch[c].setConstant(base + tint[c]);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double n = rng.uniform(-0.08, 0.08);
      for (int c = 0; c < 3; ++c) sample.image.ch[c](y, x) += n;
    }

  const int count = cfg.objects_min + rng.uniform_int(cfg.objects_max - cfg.objects_min + 1);
  for (int obj = 0; obj < count; ++obj) {
    const int cls = sample_class(cfg.class_frequencies, rng);
    bool placed = false;
    for (int attempt = 0; attempt < 15 && !placed; ++attempt) {
      const double s = rng.uniform(12.0, std::min(28.0, S * 0.45));
      const double margin = s / 2.0 + 1.0;
      const double cx = rng.uniform(margin, S - margin);
      const double cy = rng.uniform(margin, S - margin);
      ShapeStyle style = kStyles[cls];
      const double gain = rng.uniform(0.85, 1.05);
      double col[3] = {style.r * gain + rng.uniform(-0.05, 0.05),
                       style.g * gain + rng.uniform(-0.05, 0.05),
                       style.b * gain + rng.uniform(-0.05, 0.05)};

      // Tight raster extent of this shape.
      int x_lo = S, x_hi = -1, y_lo = S, y_hi = -1;
      const int scan = static_cast<int>(std::ceil(s / 2.0)) + 2;
      const int icx = static_cast<int>(cx), icy = static_cast<int>(cy);
      for (int y = std::max(0, icy - scan); y < std::min(S, icy + scan); ++y)
        for (int x = std::max(0, icx - scan); x < std::min(S, icx + scan); ++x)
          if (inside_shape(cls, x + 0.5 - cx, y + 0.5 - cy, s)) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
          }
      if (x_hi < x_lo || y_hi < y_lo) continue;
      const BoxD box{double(x_lo), double(y_lo), double(x_hi + 1), double(y_hi + 1)};

      bool overlaps = false;
      for (const auto& lb : sample.boxes)
        if (iou(box, lb.box) > 0.3) overlaps = true;
      if (overlaps) continue;

      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x)
          if (inside_shape(cls, x + 0.5 - cx, y + 0.5 - cy, s))
            for (int c = 0; c < 3; ++c) sample.image.ch[c](y, x) = col[c];

      sample.boxes.push_back(LabeledBox{box, cls, 1.0});
      placed = true;
    }
  }

  quantize_8bit(sample.image);
  return sample;
}

}  // namespace

std::vector<ImageSample> generate_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<ImageSample> out(static_cast<size_t>(cfg.num_images));
  for (int i = 0; i < cfg.num_images; ++i)
    out[static_cast<size_t>(i)] = render_image(cfg, static_cast<uint64_t>(i));
  return out;
}

DatasetSplit sample_labeled_split(const std::vector<ImageSample>& samples,
                                  double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("split.fraction: must lie in (0, 1]");
  const size_t n = samples.size();
  size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  k = std::min(k, n);
  if (k == 0)
    throw std::invalid_argument("split.fraction: yields zero labeled images (burn-in impossible)");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed({seed, 0x5e1ec7ULL}));
  for (size_t i = n; i > 1; --i) {  // Fisher-Yates, engine-stable
    const size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i)));
    std::swap(order[i - 1], order[j]);
  }

  std::vector<bool> labeled_mask(n, false);
  for (size_t i = 0; i < k; ++i) labeled_mask[order[i]] = true;

  DatasetSplit split;
  split.seed = seed;
  for (size_t i = 0; i < n; ++i) {
    if (labeled_mask[i]) {
      ImageSample s = samples[i];
      s.is_labeled = true;
      split.labeled.push_back(std::move(s));
    } else {
      ImageSample s = samples[i];
      split.unlabeled_hidden_gt.push_back(std::move(s.boxes));
      s.boxes.clear();
      s.is_labeled = false;
      split.unlabeled.push_back(std::move(s));
    }
  }
  return split;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.ch[static_cast<size_t>(c)](y, x), 0.0, 1.0);
        row[static_cast<size_t>(x) * 3 + static_cast<size_t>(c)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw DataError("short write: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image file: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw DataError("not a binary PPM (P6): " + path);
  long w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0 || maxval != 255)
    throw DataError("bad PPM header in " + path);
  f.get();  // single whitespace after maxval
  Image img = Image::filled(static_cast<int>(w), static_cast<int>(h), 0.0);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (long y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw DataError("truncated PPM pixel data in " + path);
    for (long x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.ch[static_cast<size_t>(c)](y, x) =
            row[static_cast<size_t>(x) * 3 + static_cast<size_t>(c)] / 255.0;
  }
  return img;
}

std::vector<ImageSample> load_coco_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open annotation file: " + path);
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw DataError("annotation file is not valid JSON (" + path + "): " + e.what());
  }
  for (const char* key : {"images", "annotations", "categories"})
    if (!doc.contains(key) || !doc[key].is_array())
      throw DataError(std::string("annotation file missing array '") + key + "': " + path);

  const fs::path base = fs::path(path).parent_path();

  // Category id -> contiguous class id, by ascending original id.
  std::map<long, int> cat_remap;
  for (const auto& cat : doc["categories"]) {
    if (!cat.contains("id")) throw DataError("category record without id");
    cat_remap[cat["id"].get<long>()] = 0;
  }
  {
    int next = 0;
    for (auto& [id, cls] : cat_remap) cls = next++;
  }

  struct Rec {
    long id;
    double w, h;
    size_t index;
  };
  std::map<long, Rec> image_by_id;
  std::vector<ImageSample> samples;
  for (const auto& im : doc["images"]) {
    if (!im.contains("id") || !im.contains("width") || !im.contains("height") ||
        !im.contains("file_name"))
      throw DataError("image record " + std::to_string(samples.size()) +
                      " missing id/width/height/file_name");
    const long id = im["id"].get<long>();
    const double w = im["width"].get<double>(), h = im["height"].get<double>();
    ImageSample s;
    s.is_labeled = true;
    s.image = read_ppm((base / im["file_name"].get<std::string>()).string());
    if (s.image.width != static_cast<int>(w) || s.image.height != static_cast<int>(h))
      throw DataError("image " + std::to_string(id) + ": file size disagrees with record");
    image_by_id[id] = Rec{id, w, h, samples.size()};
    samples.push_back(std::move(s));
  }

  size_t ann_index = 0;
  for (const auto& ann : doc["annotations"]) {
    const std::string where = "annotation " + std::to_string(ann_index++);
    if (!ann.contains("image_id") || !ann.contains("category_id") || !ann.contains("bbox"))
      throw DataError(where + " missing image_id/category_id/bbox");
    const long image_id = ann["image_id"].get<long>();
    const auto it = image_by_id.find(image_id);
    if (it == image_by_id.end())
      throw DataError(where + " references missing image " + std::to_string(image_id));
    const long cat = ann["category_id"].get<long>();
    const auto cit = cat_remap.find(cat);
    if (cit == cat_remap.end())
      throw DataError(where + " references missing category " + std::to_string(cat));
    const auto& bb = ann["bbox"];
    if (!bb.is_array() || bb.size() != 4) throw DataError(where + " bbox is not [x,y,w,h]");
    const double x = bb[0].get<double>(), y = bb[1].get<double>();
    const double w = bb[2].get<double>(), h = bb[3].get<double>();
    if (w < 0.0 || h < 0.0) throw DataError(where + " has negative box size");
    const auto& rec = it->second;
    BoxD box = clip_box(BoxD{x, y, x + w, y + h}, rec.w, rec.h);
    samples[rec.index].boxes.push_back(LabeledBox{box, cit->second, 1.0});
  }
  return samples;
}

int coco_class_count(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open annotation file: " + path);
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw DataError("annotation file is not valid JSON (" + path + "): " + e.what());
  }
  if (!doc.contains("categories") || !doc["categories"].is_array())
    throw DataError("annotation file missing array 'categories': " + path);
  return static_cast<int>(doc["categories"].size());
}

std::string save_coco_dataset(const std::vector<ImageSample>& samples,
                              int class_count, const std::string& dir) {
  fs::create_directories(dir);
  json doc;
  doc["images"] = json::array();
  doc["annotations"] = json::array();
  doc["categories"] = json::array();
  for (int c = 0; c < class_count; ++c)
    doc["categories"].push_back({{"id", c + 1}, {"name", "class_" + std::to_string(c)}});

  long ann_id = 1;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06zu.ppm", i);
    write_ppm(s.image, (fs::path(dir) / name).string());
    doc["images"].push_back({{"id", static_cast<long>(i)},
                             {"file_name", std::string(name)},
                             {"width", s.image.width},
                             {"height", s.image.height}});
    for (const auto& lb : s.boxes) {
      doc["annotations"].push_back(
          {{"id", ann_id++},
           {"image_id", static_cast<long>(i)},
           {"category_id", lb.class_id + 1},
           {"bbox", {lb.box.x_min, lb.box.y_min, lb.box.width(), lb.box.height()}}});
    }
  }

  const std::string ann_path = (fs::path(dir) / "annotations.json").string();
  std::ofstream f(ann_path);
  if (!f) throw DataError("cannot open for writing: " + ann_path);
  f << doc.dump(1) << "\n";
  return ann_path;
}

}  // namespace ssdet
