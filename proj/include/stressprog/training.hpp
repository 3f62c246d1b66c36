#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stressprog/evaluation.hpp"
#include "stressprog/model.hpp"

namespace stressprog {

// A contiguous run of labelled windows from one recording.
struct LabelledSequence {
  std::string recording_id;
  Eigen::MatrixXd features;       // d x T, one column per window
  std::vector<VadCode> targets;   // relabelled stress-progression codes
  std::vector<std::size_t> window_index;  // original window index per column

  std::size_t size() const { return targets.size(); }
};

struct TrainingSample {
  Eigen::MatrixXd features;  // d x len
  ContextSequence context;
  VadCode target;
  std::optional<std::uint64_t> dropout_seed;
};

// Model inputs for window t with a history of `history` windows (the current
// one included; fewer near the start). history 0 behaves like 1: only the
// current window with the s_default context.
std::size_t input_length(std::size_t t, int history);

// Ground-truth context variant.
TrainingSample make_sample(const LabelledSequence& seq, std::size_t t, int history);

// Context built from the model's own predictions for the earlier windows of
// the same input span (no gradient flows through it).
ContextSequence rollout_context(const ModelParams& params, const LabelledSequence& seq, std::size_t t, int history);

// Sequential inference: each window's context holds the predictions made for
// the preceding windows.
std::vector<Prediction> infer_sequence(const ModelParams& params, const LabelledSequence& seq, int history);

struct BatchGradient {
  ModelParams grad;
  double loss = 0.0;
};

// Exact gradient of the mean batch loss. Throws std::invalid_argument on an
// empty batch and NumericDivergence on a non-finite loss or gradient.
BatchGradient gradient(const ModelParams& params, std::span<const TrainingSample> batch);

// True with probability p: use the ground-truth context.
bool teacher_forcing_draw(double p, std::mt19937_64& rng);

ContextSequence sample_context(const ContextSequence& ground_truth, const ContextSequence& model_rollout, double p,
                               std::mt19937_64& rng);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ModelParams& like, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ModelParams& params, const ModelParams& grad, double learning_rate);
  long steps() const { return t_; }

 private:
  ModelParams m_;
  ModelParams v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainConfig {
  int epochs = 20;
  int iterations_per_epoch = 1000;
  int batch_size = 16;
  double learning_rate = 0.001;
  double teacher_forcing_p = 0.8;
  std::uint64_t seed = 7;
  int patience = 5;
  double lr_decay_factor = 0.5;
  int lr_decay_interval = 5;
  int history = 4;

  void validate() const;
  // 20 epochs for the recurrent model, 50 for the transformer.
  static TrainConfig defaults_for(Architecture arch);
};

struct MetricsRow {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double val_f1 = 0.0;
  double lr = 0.0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

struct TrainResult {
  ModelParams best;
  std::vector<MetricsRow> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Mean BCE over every window of `data` with ground-truth contexts.
double validation_loss(const ModelParams& params, const std::vector<LabelledSequence>& data, int history);

// Segment-level stress scoring with sequential inference.
EvalReport evaluate_segments(const ModelParams& params, const std::vector<LabelledSequence>& data, int history);

// Adam over mini-batches drawn with replacement from all train windows,
// step learning-rate decay, early stopping on validation loss. Returns the
// best-validation parameters. Throws std::invalid_argument on empty splits
// and NumericDivergence when the loss stops being finite.
TrainResult train(const std::vector<LabelledSequence>& train_data, const std::vector<LabelledSequence>& val_data,
                  const ModelShape& shape, const TrainConfig& config,
                  const std::function<void(const MetricsRow&)>& on_epoch = {});

}  // namespace stressprog
