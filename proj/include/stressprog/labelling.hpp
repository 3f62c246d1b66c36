#pragma once

#include <span>
#include <vector>

#include "stressprog/vad.hpp"

namespace stressprog {

// Drives the decayed-distance relabelling. The stress threshold is
// tau * theta_max(n, lambda).
struct LabellingConfig {
  int n = 4;
  double lambda = 0.8;
  double tau = 0.5;

  void validate() const;
  double threshold() const;
};

struct WeightedDistance {
  double delta = 1.0;
  int distance = 0;
  double theta = 0.0;
};

// e^(-lambda * age). Throws std::invalid_argument for negative age or
// non-positive lambda.
double decay_weight(double lambda, int age);

// Per-window weighted distances for a history ordered oldest -> current.
std::vector<WeightedDistance> weighted_distances(std::span<const VadCode> history, double lambda);

// Decayed sum of Hamming distances to the stress code. The last element of
// `history` is the current window (age 0).
double theta_total(std::span<const VadCode> history, double lambda);

// Upper end of the attainable theta_total range over n + 1 windows.
double theta_max(int n, double lambda);

// Stress code when the decayed distance of history + current is within the
// threshold, otherwise `current`. `history` holds at most config.n codes.
VadCode assign_label(std::span<const VadCode> history, const VadCode& current,
                     const LabellingConfig& config);

std::vector<VadCode> relabel_sequence(std::span<const VadCode> emotions,
                                      const LabellingConfig& config);

}  // namespace stressprog
