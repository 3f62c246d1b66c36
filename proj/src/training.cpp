#include "stressprog/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <utility>

#include "stressprog/errors.hpp"
#include "stressprog/loss.hpp"
#include "stressprog/rng.hpp"

namespace stressprog {

std::size_t input_length(std::size_t t, int history) {
  const auto h = static_cast<std::size_t>(std::max(history, 1));
  return std::min(h, t + 1);
}

TrainingSample make_sample(const LabelledSequence& seq, std::size_t t, int history) {
  if (t >= seq.size()) throw std::out_of_range("window index past the end of the sequence");
  const std::size_t len = input_length(t, history);
  const std::size_t first = t + 1 - len;
  std::span<const VadCode> previous(seq.targets.data() + first, len - 1);
  return {seq.features.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(len)),
          ContextSequence::from_previous(previous), seq.targets[t], std::nullopt};
}

ContextSequence rollout_context(const ModelParams& params, const LabelledSequence& seq, std::size_t t, int history) {
  const std::size_t len = input_length(t, history);
  const std::size_t first = t + 1 - len;
  std::vector<VadCode> predicted;
  predicted.reserve(len - 1);
  for (std::size_t j = first; j < t; ++j) {
    const auto span_len = static_cast<Eigen::Index>(j - first + 1);
    const Prediction p = forward(params, seq.features.middleCols(static_cast<Eigen::Index>(first), span_len),
                                 ContextSequence::from_previous(predicted));
    predicted.push_back(p.code);
  }
  return ContextSequence::from_previous(predicted);
}

std::vector<Prediction> infer_sequence(const ModelParams& params, const LabelledSequence& seq, int history) {
  std::vector<Prediction> out;
  std::vector<VadCode> codes;
  out.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const std::size_t len = input_length(t, history);
    const std::size_t first = t + 1 - len;
    std::span<const VadCode> previous(codes.data() + first, len - 1);
    out.push_back(forward(params,
                          seq.features.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(len)),
                          ContextSequence::from_previous(previous)));
    codes.push_back(out.back().code);
  }
  return out;
}

BatchGradient gradient(const ModelParams& params, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::invalid_argument("gradient needs a non-empty batch");
  BatchGradient out{params.zeros_like(), 0.0};
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    ForwardOptions options;
    options.dropout_seed = sample.dropout_seed;
    const auto r = accumulate_gradient(params, sample.features, sample.context, sample.target, weight, out.grad, options);
    out.loss += weight * r.loss;
  }
  if (!std::isfinite(out.loss)) throw NumericDivergence("non-finite training loss");
  if (!out.grad.all_finite()) throw NumericDivergence("non-finite gradient");
  return out;
}

bool teacher_forcing_draw(double p, std::mt19937_64& rng) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

ContextSequence sample_context(const ContextSequence& ground_truth, const ContextSequence& model_rollout, double p,
                               std::mt19937_64& rng) {
  if (ground_truth.size() != model_rollout.size()) throw std::invalid_argument("context length mismatch");
  return teacher_forcing_draw(p, rng) ? ground_truth : model_rollout;
}

// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(const ModelParams& like, double beta1, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grad, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<Tensor*> ps, ms, vs;
  std::vector<const Tensor*> gs;
  params.visit([&](const std::string&, Tensor& t) { ps.push_back(&t); });
  m_.visit([&](const std::string&, Tensor& t) { ms.push_back(&t); });
  v_.visit([&](const std::string&, Tensor& t) { vs.push_back(&t); });
  grad.visit([&](const std::string&, const Tensor& t) { gs.push_back(&t); });
  if (gs.size() != ps.size()) throw std::invalid_argument("gradient does not match parameters");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Tensor& m = *ms[i];
    Tensor& v = *vs[i];
    const Tensor& g = *gs[i];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    ps[i]->array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs <= 0 || iterations_per_epoch <= 0 || batch_size <= 0) {
    throw std::invalid_argument("epochs, iterations and batch size must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(teacher_forcing_p >= 0.0 && teacher_forcing_p <= 1.0)) {
    throw std::invalid_argument("teacher forcing probability must be in [0,1]");
  }
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (lr_decay_interval <= 0 || !(lr_decay_factor > 0.0)) throw std::invalid_argument("bad scheduler settings");
  if (history < 0) throw std::invalid_argument("history must be >= 0");
}

TrainConfig TrainConfig::defaults_for(Architecture arch) {
  TrainConfig c;
  c.epochs = arch == Architecture::Recurrent ? 20 : 50;
  return c;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

}  // namespace

void write_metrics_header(std::ostream& out) { out << "epoch,step,train_loss,val_loss,val_acc,val_f1,lr\n"; }

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.epoch << ',' << r.step << ',' << fixed(r.train_loss) << ',' << fixed(r.val_loss) << ',' << fixed(r.val_acc)
      << ',' << fixed(r.val_f1) << ',' << fixed(r.lr) << '\n';
}

double validation_loss(const ModelParams& params, const std::vector<LabelledSequence>& data, int history) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : data) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const TrainingSample s = make_sample(seq, t, history);
      const Prediction p = forward(params, s.features, s.context);
      total += bce_loss(p.probs, s.target).total;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("validation set has no windows");
  return total / static_cast<double>(count);
}

EvalReport evaluate_segments(const ModelParams& params, const std::vector<LabelledSequence>& data, int history) {
  std::vector<bool> predicted, truth;
  for (const auto& seq : data) {
    const auto preds = infer_sequence(params, seq, history);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      predicted.push_back(preds[t].stress);
      truth.push_back(is_stress(seq.targets[t]));
    }
  }
  return score_segment_level(predicted, truth);
}

TrainResult train(const std::vector<LabelledSequence>& train_data, const std::vector<LabelledSequence>& val_data,
                  const ModelShape& shape, const TrainConfig& config,
                  const std::function<void(const MetricsRow&)>& on_epoch) {
  config.validate();
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (std::size_t s = 0; s < train_data.size(); ++s) {
    if (train_data[s].features.rows() != shape.input_dim) {
      throw std::invalid_argument("training features do not match the model input dimension");
    }
    for (std::size_t t = 0; t < train_data[s].size(); ++t) positions.emplace_back(s, t);
  }
  if (positions.empty()) throw std::invalid_argument("training split is empty");
  std::size_t val_windows = 0;
  for (const auto& seq : val_data) val_windows += seq.size();
  if (val_windows == 0) throw std::invalid_argument("validation split is empty");

  ModelParams params = ModelParams::initialize(shape, derive_seed(config.seed, {0}));
  AdamOptimizer adam(params);
  TrainResult result;
  result.best = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;
  long step = 0;
  int epochs_without_improvement = 0;
  std::vector<TrainingSample> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int it = 0; it < config.iterations_per_epoch; ++it) {
      ++step;
      batch.clear();
      for (int b = 0; b < config.batch_size; ++b) {
        std::mt19937_64 rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b)}));
        std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
        const auto [s, t] = positions[pick(rng)];
        TrainingSample sample = make_sample(train_data[s], t, config.history);
        if (!teacher_forcing_draw(config.teacher_forcing_p, rng)) {
          sample.context = rollout_context(params, train_data[s], t, config.history);
        }
        sample.dropout_seed = rng();
        batch.push_back(std::move(sample));
      }
      BatchGradient g;
      try {
        g = gradient(params, batch);
      } catch (const NumericDivergence& e) {
        throw NumericDivergence(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(step));
      }
      adam.step(params, g.grad, lr);
      loss_sum += g.loss;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.step = step;
    row.train_loss = loss_sum / config.iterations_per_epoch;
    row.val_loss = validation_loss(params, val_data, config.history);
    if (!std::isfinite(row.val_loss)) {
      throw NumericDivergence("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const EvalReport val = evaluate_segments(params, val_data, config.history);
    row.val_acc = val.accuracy;
    row.val_f1 = val.f1;
    row.lr = lr;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    if (row.val_loss < result.best_val_loss) {
      result.best_val_loss = row.val_loss;
      result.best = params;
      result.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement > config.patience) {
      result.stopped_early = true;
      break;
    }
    if (epoch % config.lr_decay_interval == 0) lr *= config.lr_decay_factor;
  }
  return result;
}

}  // namespace stressprog
