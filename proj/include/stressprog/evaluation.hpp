#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stressprog/vad.hpp"

namespace stressprog {

// Positive class is stress everywhere.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  void add(bool predicted, bool truth);
  bool operator==(const ConfusionCounts&) const = default;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;  // segments or recordings scored
  ConfusionCounts confusion;

  // accuracy = (TP + TN) / total, f1 = 2TP / (2TP + FP + FN), 0/0 -> 0.
  static EvalReport from_counts(const ConfusionCounts& counts);
};

// Stress iff stress votes >= non-stress votes (ties count as stress).
// Throws std::invalid_argument on an empty list.
bool majority_vote(const std::vector<bool>& window_stress);

// Elementwise comparison. Throws std::invalid_argument on a length mismatch
// or empty input.
EvalReport score_segment_level(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// One majority vote per recording, compared with that recording's truth.
// The key sets must match and every group must be non-empty.
EvalReport score_sequence_level(const std::map<std::string, std::vector<bool>>& window_predictions,
                                const std::map<std::string, bool>& truth);

// ---- Labelling sweep ----

// Per-window emotion codes and reference stress annotations for one
// recording. Unlabelled windows are nullopt; relabelling runs over each
// contiguous labelled stretch.
struct SweepSequence {
  std::vector<std::optional<VadCode>> emotions;
  std::vector<std::optional<VadCode>> reference;
};

struct SweepOptions {
  std::vector<int> ns{0, 1, 2, 3, 4, 5};
  std::vector<double> lambdas{0.01, 0.1, 0.8, 1.0};
  double tau = 0.5;
  // A reference window is compared with the generated label of the nearest
  // labelled window at most this many windows away (earlier wins ties).
  int tolerance = 0;
};

struct SweepGrid {
  std::vector<int> ns;
  std::vector<double> lambdas;
  Eigen::MatrixXd binary;  // stress / non-stress agreement, rows = n
  Eigen::MatrixXd exact;   // exact VAD-code agreement
  std::size_t compared = 0;
};

// Throws std::invalid_argument when there is nothing to compare.
SweepGrid labelling_sweep(const std::vector<SweepSequence>& sequences, const SweepOptions& options);

// Grid layout: header "n,<lambda>,...", one row per n, values as fractions.
void write_sweep_csv(std::ostream& out, const SweepGrid& grid, bool exact);

// ---- Ablation ----

struct AblationCell {
  std::string model;     // checkpoint label
  std::string features;  // feature source label
  int n = 0;
  EvalReport report;
};

// Columns: model,features,n,accuracy,f1,count,tp,fp,tn,fn
void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells);

}  // namespace stressprog
