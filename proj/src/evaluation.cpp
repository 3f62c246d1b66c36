#include "stressprog/evaluation.hpp"

#include <cstdio>
#include <stdexcept>

#include "stressprog/labelling.hpp"

namespace stressprog {

void ConfusionCounts::add(bool predicted, bool truth) {
  if (predicted && truth) ++tp;
  else if (predicted) ++fp;
  else if (truth) ++fn;
  else ++tn;
}

EvalReport EvalReport::from_counts(const ConfusionCounts& counts) {
  EvalReport r;
  r.confusion = counts;
  r.count = counts.total();
  r.accuracy = r.count == 0 ? 0.0 : static_cast<double>(counts.tp + counts.tn) / static_cast<double>(r.count);
  const std::size_t denom = 2 * counts.tp + counts.fp + counts.fn;
  r.f1 = denom == 0 ? 0.0 : static_cast<double>(2 * counts.tp) / static_cast<double>(denom);
  return r;
}

bool majority_vote(const std::vector<bool>& window_stress) {
  if (window_stress.empty()) throw std::invalid_argument("majority vote over an empty list");
  std::size_t stress = 0;
  for (bool s : window_stress) stress += s ? 1 : 0;
  return 2 * stress >= window_stress.size();
}

EvalReport score_segment_level(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction/truth length mismatch");
  if (predicted.empty()) throw std::invalid_argument("nothing to score");
  ConfusionCounts counts;
  for (std::size_t i = 0; i < predicted.size(); ++i) counts.add(predicted[i], truth[i]);
  return EvalReport::from_counts(counts);
}

EvalReport score_sequence_level(const std::map<std::string, std::vector<bool>>& window_predictions,
                                const std::map<std::string, bool>& truth) {
  if (window_predictions.size() != truth.size()) throw std::invalid_argument("recording/truth count mismatch");
  if (window_predictions.empty()) throw std::invalid_argument("nothing to score");
  ConfusionCounts counts;
  for (const auto& [id, windows] : window_predictions) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw std::invalid_argument("no ground truth for recording '" + id + "'");
    if (windows.empty()) throw std::invalid_argument("recording '" + id + "' has no windows");
    counts.add(majority_vote(windows), it->second);
  }
  return EvalReport::from_counts(counts);
}

namespace {

// Relabels each contiguous run of labelled windows.
std::vector<std::optional<VadCode>> relabel_runs(const std::vector<std::optional<VadCode>>& emotions,
                                                 const LabellingConfig& config) {
  std::vector<std::optional<VadCode>> out(emotions.size());
  std::size_t t = 0;
  while (t < emotions.size()) {
    if (!emotions[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    std::vector<VadCode> run;
    while (end < emotions.size() && emotions[end]) run.push_back(*emotions[end++]);
    const auto labels = relabel_sequence(run, config);
    for (std::size_t i = 0; i < labels.size(); ++i) out[t + i] = labels[i];
    t = end;
  }
  return out;
}

std::optional<std::size_t> nearest_labelled(const std::vector<std::optional<VadCode>>& generated, std::size_t r,
                                            int tolerance) {
  for (int dist = 0; dist <= tolerance; ++dist) {
    const auto d = static_cast<std::size_t>(dist);
    if (d <= r && generated[r - d]) return r - d;
    if (r + d < generated.size() && generated[r + d]) return r + d;
  }
  return std::nullopt;
}

}  // namespace

SweepGrid labelling_sweep(const std::vector<SweepSequence>& sequences, const SweepOptions& options) {
  if (options.ns.empty() || options.lambdas.empty()) throw std::invalid_argument("empty sweep axes");
  if (options.tolerance < 0) throw std::invalid_argument("tolerance must be >= 0");
  for (const auto& s : sequences) {
    if (s.emotions.size() != s.reference.size()) throw std::invalid_argument("emotion/reference length mismatch");
  }
  SweepGrid grid;
  grid.ns = options.ns;
  grid.lambdas = options.lambdas;
  const auto rows = static_cast<Eigen::Index>(options.ns.size());
  const auto cols = static_cast<Eigen::Index>(options.lambdas.size());
  grid.binary.resize(rows, cols);
  grid.exact.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      LabellingConfig config{options.ns[static_cast<std::size_t>(i)], options.lambdas[static_cast<std::size_t>(j)],
                             options.tau};
      std::size_t compared = 0, binary = 0, exact = 0;
      for (const auto& s : sequences) {
        const auto generated = relabel_runs(s.emotions, config);
        for (std::size_t r = 0; r < s.reference.size(); ++r) {
          if (!s.reference[r]) continue;
          const auto at = nearest_labelled(generated, r, options.tolerance);
          if (!at) continue;
          const VadCode& g = *generated[*at];
          ++compared;
          binary += is_stress(g) == is_stress(*s.reference[r]) ? 1 : 0;
          exact += g == *s.reference[r] ? 1 : 0;
        }
      }
      if (compared == 0) throw std::invalid_argument("labelling sweep found no reference windows to compare");
      grid.compared = compared;
      grid.binary(i, j) = static_cast<double>(binary) / static_cast<double>(compared);
      grid.exact(i, j) = static_cast<double>(exact) / static_cast<double>(compared);
    }
  }
  return grid;
}

namespace {

std::string fmt_double(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepGrid& grid, bool exact) {
  out << "n";
  for (double l : grid.lambdas) out << ',' << fmt_double(l, "%g");
  out << '\n';
  const Eigen::MatrixXd& m = exact ? grid.exact : grid.binary;
  for (std::size_t i = 0; i < grid.ns.size(); ++i) {
    out << grid.ns[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << fmt_double(m(static_cast<Eigen::Index>(i), j), "%.6f");
    out << '\n';
  }
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells) {
  out << "model,features,n,accuracy,f1,count,tp,fp,tn,fn\n";
  for (const auto& c : cells) {
    const auto& k = c.report.confusion;
    out << c.model << ',' << c.features << ',' << c.n << ',' << fmt_double(c.report.accuracy, "%.6f") << ','
        << fmt_double(c.report.f1, "%.6f") << ',' << c.report.count << ',' << k.tp << ',' << k.fp << ',' << k.tn
        << ',' << k.fn << '\n';
  }
}

}  // namespace stressprog
