#include "ssdet/params.hpp"

namespace ssdet {

Eigen::Index ParamLayout::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (has(name)) throw ArchitectureError("duplicate parameter name: " + name);
  entries_.push_back(ParamEntry{name, total_, rows, cols});
  total_ += rows * cols;
  return entries_.back().offset;
}

const ParamEntry& ParamLayout::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ArchitectureError("unknown parameter name: " + name);
}

bool ParamLayout::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

Eigen::Map<Eigen::MatrixXd> ParamVector::view(const std::string& name) {
  const auto& e = layout->entry(name);
  return {values.data() + e.offset, e.rows, e.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamVector::view(const std::string& name) const {
  const auto& e = layout->entry(name);
  return {values.data() + e.offset, e.rows, e.cols};
}

void ParamVector::require_same_layout(const ParamVector& other) const {
  if (!layout || !other.layout || !(*layout == *other.layout))
    throw ArchitectureError("parameter layout mismatch");
}

ParamVector make_param_vector(std::shared_ptr<const ParamLayout> layout) {
  ParamVector p;
  p.values = Eigen::VectorXd::Zero(layout->total());
  p.layout = std::move(layout);
  return p;
}

ParamVector clone_params(const ParamVector& params) {
  ParamVector copy;
  copy.values = params.values;
  copy.layout = params.layout;
  return copy;
}

Eigen::Map<Eigen::MatrixXd> layout_view(const ParamLayout& layout,
                                        Eigen::VectorXd& flat,
                                        const std::string& name) {
  const auto& e = layout.entry(name);
  return {flat.data() + e.offset, e.rows, e.cols};
}

}  // namespace ssdet
