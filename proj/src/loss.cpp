#include "stressprog/loss.hpp"

#include <algorithm>
#include <cmath>

namespace stressprog {

LossReport bce_loss(const Eigen::Vector3d& probs, const VadCode& target) {
  LossReport report;
  for (int i = 0; i < 3; ++i) {
    const double p = std::clamp(probs(i), kProbClamp, 1.0 - kProbClamp);
    const double t = target[static_cast<std::size_t>(i)];
    report.per_dimension[static_cast<std::size_t>(i)] = -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  report.total = (report.per_dimension[0] + report.per_dimension[1] + report.per_dimension[2]) / 3.0;
  return report;
}

Eigen::Vector3d bce_logit_gradient(const Eigen::Vector3d& probs, const VadCode& target) {
  Eigen::Vector3d grad;
  for (int i = 0; i < 3; ++i) {
    const double p = probs(i);
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    grad(i) = clamped ? 0.0 : (p - target[static_cast<std::size_t>(i)]) / 3.0;
  }
  return grad;
}

}  // namespace stressprog
