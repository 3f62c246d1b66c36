#pragma once

#include <Eigen/Dense>
#include <array>

#include "stressprog/vad.hpp"

namespace stressprog {

inline constexpr double kProbClamp = 1e-7;

struct LossReport {
  std::array<double, 3> per_dimension{};  // valence, arousal, dominance
  double total = 0.0;                     // mean of the three components
};

// Per-dimension binary cross-entropy with probabilities clamped to
// [1e-7, 1 - 1e-7].
LossReport bce_loss(const Eigen::Vector3d& probs, const VadCode& target);

// d(total)/d(logit_i) for probs = sigmoid(logits). Zero where the clamp is
// active, matching the clamped loss.
Eigen::Vector3d bce_logit_gradient(const Eigen::Vector3d& probs, const VadCode& target);

}  // namespace stressprog
