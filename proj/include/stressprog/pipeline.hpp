#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stressprog/evaluation.hpp"
#include "stressprog/features.hpp"
#include "stressprog/labelling.hpp"
#include "stressprog/manifest.hpp"
#include "stressprog/segmentation.hpp"
#include "stressprog/training.hpp"

namespace stressprog {

// "mfcc" computes MFCC vectors from the WAV files; "file:<dir>" loads
// <dir>/<utterance_id>.fseq with one row per window.
struct FeatureSource {
  enum class Kind { Mfcc, File };
  Kind kind = Kind::Mfcc;
  std::filesystem::path dir;
  MfccConfig mfcc;

  static FeatureSource parse(const std::string& spec);
  std::string describe() const;
};

// Windows of one manifest record with labels aligned from its spans. For
// file features the window grid is implied by the row count.
std::vector<SegmentWindow> record_windows(const ManifestRecord& record, const WindowSpec& spec = {});

// Per-window feature matrix (rows = windows) for a record.
Eigen::MatrixXd record_features(const ManifestRecord& record, const FeatureSource& source,
                                const MfccExtractor* extractor = nullptr);

struct Dataset {
  std::vector<LabelledSequence> train, val, test;
  // Recording-level stress truth: the manifest's "stress" field, else the
  // majority of the record's relabelled window codes.
  std::map<std::string, bool> recording_truth;
  int dim = 0;

  const std::vector<LabelledSequence>& split(const std::string& name) const;
};

// Relabels every contiguous run of labelled windows; unlabelled windows stay
// empty.
std::vector<std::optional<VadCode>> relabel_windows(const std::vector<SegmentWindow>& windows,
                                                    const LabellingConfig& labelling);

// Splits each record into contiguous labelled runs and relabels every run.
Dataset build_dataset(const std::vector<ManifestRecord>& records, const FeatureSource& source,
                      const LabellingConfig& labelling);

std::vector<SweepSequence> sweep_sequences(const std::vector<ManifestRecord>& records);

enum class EvalLevel { Segment, Sequence };
EvalLevel parse_eval_level(const std::string& name);

EvalReport evaluate(const ModelParams& params, const std::vector<LabelledSequence>& data,
                    const std::map<std::string, bool>& recording_truth, int history, EvalLevel level);

struct AblationSpec {
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::string> features;  // one feature source per checkpoint
  std::vector<int> ns;
  double lambda = 0.8;
  double tau = 0.5;
  std::string split = "test";
  EvalLevel level = EvalLevel::Sequence;
};

// Every (checkpoint, feature source) pair evaluated at every n. Throws
// DataError for a missing checkpoint.
std::vector<AblationCell> ablation_grid(const std::vector<ManifestRecord>& records, const AblationSpec& spec);

}  // namespace stressprog
