#pragma once

#include <Eigen/Core>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssdet {

class ArchitectureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamEntry {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Stable name -> (offset, shape) map of a flat parameter vector. Two
/// ParamVectors built from the same architecture share one layout object.
class ParamLayout {
 public:
  Eigen::Index add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  const ParamEntry& entry(const std::string& name) const;
  bool has(const std::string& name) const;
  Eigen::Index total() const { return total_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<ParamEntry> entries_;
  Eigen::Index total_ = 0;
};

/// Flat, ordered view of all detector parameters.
struct ParamVector {
  Eigen::VectorXd values;
  std::shared_ptr<const ParamLayout> layout;

  bool empty() const { return values.size() == 0; }

  Eigen::Map<Eigen::MatrixXd> view(const std::string& name);
  Eigen::Map<const Eigen::MatrixXd> view(const std::string& name) const;

  /// Throws ArchitectureError unless `other` has an identical layout.
  void require_same_layout(const ParamVector& other) const;
};

ParamVector make_param_vector(std::shared_ptr<const ParamLayout> layout);

/// Value-equal, storage-independent copy (the layout, which is immutable,
/// stays shared).
ParamVector clone_params(const ParamVector& params);

/// Map a name -> matrix view over any flat vector with this layout (used
/// for gradient buffers, which intentionally are not ParamVectors).
Eigen::Map<Eigen::MatrixXd> layout_view(const ParamLayout& layout,
                                        Eigen::VectorXd& flat,
                                        const std::string& name);

}  // namespace ssdet
