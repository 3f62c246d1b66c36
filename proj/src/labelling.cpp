#include "stressprog/labelling.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stressprog {

void LabellingConfig::validate() const {
  if (n < 0) throw std::invalid_argument("labelling n must be >= 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("labelling lambda must be > 0");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("labelling tau must be in [0,1]");
}

double LabellingConfig::threshold() const { return tau * theta_max(n, lambda); }

double decay_weight(double lambda, int age) {
  if (age < 0) throw std::invalid_argument("decay age must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("decay lambda must be > 0");
  return std::exp(-lambda * static_cast<double>(age));
}

std::vector<WeightedDistance> weighted_distances(std::span<const VadCode> history, double lambda) {
  std::vector<WeightedDistance> out;
  out.reserve(history.size());
  const int last = static_cast<int>(history.size()) - 1;
  for (int i = 0; i <= last; ++i) {
    WeightedDistance w;
    w.delta = decay_weight(lambda, last - i);
    w.distance = hamming_distance(kStressCode, history[i]);
    w.theta = w.delta * w.distance;
    out.push_back(w);
  }
  return out;
}

double theta_total(std::span<const VadCode> history, double lambda) {
  if (history.empty()) throw std::invalid_argument("theta_total needs a non-empty history");
  double total = 0.0;
  for (const auto& w : weighted_distances(history, lambda)) total += w.theta;
  return total;
}

double theta_max(int n, double lambda) {
  if (n < 0) throw std::invalid_argument("theta_max n must be >= 0");
  double total = 0.0;
  for (int k = 0; k <= n; ++k) total += 2.0 * decay_weight(lambda, k);
  return total;
}

VadCode assign_label(std::span<const VadCode> history, const VadCode& current,
                     const LabellingConfig& config) {
  config.validate();
  if (history.size() > static_cast<std::size_t>(config.n)) {
    throw std::invalid_argument("history longer than config.n (" + std::to_string(config.n) + ")");
  }
  std::vector<VadCode> window(history.begin(), history.end());
  window.push_back(current);
  return theta_total(window, config.lambda) <= config.threshold() ? kStressCode : current;
}

std::vector<VadCode> relabel_sequence(std::span<const VadCode> emotions,
                                      const LabellingConfig& config) {
  if (emotions.empty()) throw std::invalid_argument("relabel_sequence needs a non-empty input");
  config.validate();
  std::vector<VadCode> out;
  out.reserve(emotions.size());
  const std::size_t n = static_cast<std::size_t>(config.n);
  for (std::size_t t = 0; t < emotions.size(); ++t) {
    const std::size_t first = t >= n ? t - n : 0;
    out.push_back(assign_label(emotions.subspan(first, t - first), emotions[t], config));
  }
  return out;
}

}  // namespace stressprog
