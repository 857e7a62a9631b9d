#pragma once

#include "ssdet/params.hpp"

namespace ssdet {

/// Teacher refinement: returns alpha * teacher + (1 - alpha) * student,
/// coordinate by coordinate. Inputs are not mutated. Throws
/// ArchitectureError on layout mismatch, std::invalid_argument when alpha
/// is outside [0, 1].
ParamVector ema_update(const ParamVector& teacher, const ParamVector& student, double alpha);

/// In-place variant for the trainer, which holds exclusive write access to
/// the teacher between pseudo-label generations.
void ema_update_inplace(ParamVector& teacher, const ParamVector& student, double alpha);

/// Closed-form teacher after i - 1 plain-SGD student steps and one EMA
/// update per step:
///
///   theta_t(i) = theta_hat - lr * sum_{k=1}^{i-1} (1 - alpha^(i-k)) * g_k
///
/// where theta_hat is the shared weight right after burn-in and g_k the
/// gradient used in the k-th student step. Verification oracle only; the
/// step-by-step simulation is the authoritative definition.
ParamVector closed_form_teacher(const ParamVector& theta_hat,
                                const std::vector<Eigen::VectorXd>& student_grads,
                                double alpha, double learning_rate, int i);

}  // namespace ssdet
