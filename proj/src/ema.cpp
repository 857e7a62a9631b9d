#include "ssdet/ema.hpp"

#include <cmath>
#include <stdexcept>

namespace ssdet {

namespace {
void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ema: alpha must lie in [0, 1]");
}
}  // namespace

ParamVector ema_update(const ParamVector& teacher, const ParamVector& student, double alpha) {
  check_alpha(alpha);
  teacher.require_same_layout(student);
  ParamVector out = clone_params(teacher);
  // Scalar loop on purpose: the contract is the exact per-coordinate affine
  // expression alpha * t[j] + (1 - alpha) * s[j].
  const double beta = 1.0 - alpha;
  for (Eigen::Index j = 0; j < out.values.size(); ++j)
    out.values(j) = alpha * teacher.values(j) + beta * student.values(j);
  return out;
}

void ema_update_inplace(ParamVector& teacher, const ParamVector& student, double alpha) {
  check_alpha(alpha);
  teacher.require_same_layout(student);
  const double beta = 1.0 - alpha;
  for (Eigen::Index j = 0; j < teacher.values.size(); ++j)
    teacher.values(j) = alpha * teacher.values(j) + beta * student.values(j);
}

ParamVector closed_form_teacher(const ParamVector& theta_hat,
                                const std::vector<Eigen::VectorXd>& student_grads,
                                double alpha, double learning_rate, int i) {
  check_alpha(alpha);
  if (i < 1) throw std::invalid_argument("closed_form_teacher: i must be >= 1");
  if (static_cast<int>(student_grads.size()) < i - 1)
    throw std::invalid_argument("closed_form_teacher: need at least i - 1 gradients");
  ParamVector out = clone_params(theta_hat);
  for (int k = 1; k <= i - 1; ++k) {
    const Eigen::VectorXd& g = student_grads[static_cast<size_t>(k - 1)];
    if (g.size() != theta_hat.values.size())
      throw std::invalid_argument("closed_form_teacher: gradient size mismatch");
    const double coeff = 1.0 - std::pow(alpha, i - k);
    out.values -= learning_rate * coeff * g;
  }
  return out;
}

}  // namespace ssdet
