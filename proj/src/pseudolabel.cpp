#include "ssdet/pseudolabel.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

namespace ssdet {

DetectionSet classwise_nms(const DetectionSet& dets, double nms_iou) {
  if (!(nms_iou > 0.0 && nms_iou <= 1.0))
    throw std::invalid_argument("classwise_nms: nms_iou must lie in (0, 1]");

  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < dets.size(); ++i) by_class[dets[i].class_id].push_back(static_cast<int>(i));

  DetectionSet out;
  for (const auto& [cls, indices] : by_class) {
    std::vector<BoxD> boxes;
    std::vector<double> scores;
    for (int i : indices) {
      boxes.push_back(dets[static_cast<size_t>(i)].box);
      scores.push_back(dets[static_cast<size_t>(i)].score);
    }
    for (int k : greedy_nms_indices(boxes, scores, nms_iou))
      out.push_back(dets[static_cast<size_t>(indices[static_cast<size_t>(k)])]);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LabeledBox& a, const LabeledBox& b) { return a.score > b.score; });
  return out;
}

DetectionSet confidence_filter(const DetectionSet& dets, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("confidence_filter: delta must lie in [0, 1]");
  DetectionSet out;
  for (const auto& d : dets)
    if (d.score >= delta) out.push_back(d);
  return out;
}

PseudoLabelSet generate_pseudo_labels(const DetectorNet& net, const ParamVector& teacher,
                                      const Image& weak_image, double delta, double nms_iou,
                                      int iteration, double score_floor,
                                      double proposal_nms_iou) {
  const double floor = std::min(score_floor, std::max(delta - 1e-9, 0.0));
  DetectionSet raw = net.predict(teacher, weak_image, floor, proposal_nms_iou);
  DetectionSet kept = confidence_filter(classwise_nms(raw, nms_iou), delta);
  PseudoLabelSet out;
  out.boxes = std::move(kept);
  out.source_iteration = iteration;
  out.delta_used = delta;
  return out;
}

void dump_pseudo_labels_coco(const std::vector<PseudoLabelSet>& sets, int class_count,
                             int image_size, const std::string& path) {
  nlohmann::json doc;
  doc["images"] = nlohmann::json::array();
  doc["annotations"] = nlohmann::json::array();
  doc["categories"] = nlohmann::json::array();
  for (int c = 0; c < class_count; ++c)
    doc["categories"].push_back({{"id", c + 1}, {"name", "class_" + std::to_string(c)}});
  long ann_id = 1;
  for (size_t i = 0; i < sets.size(); ++i) {
    doc["images"].push_back({{"id", static_cast<long>(i)},
                             {"file_name", "unlabeled_" + std::to_string(i)},
                             {"width", image_size},
                             {"height", image_size}});
    for (const auto& lb : sets[i].boxes)
      doc["annotations"].push_back(
          {{"id", ann_id++},
           {"image_id", static_cast<long>(i)},
           {"category_id", lb.class_id + 1},
           {"score", lb.score},
           {"bbox", {lb.box.x_min, lb.box.y_min, lb.box.width(), lb.box.height()}}});
  }
  std::ofstream f(path);
  f << doc.dump(1) << "\n";
}

}  // namespace ssdet
