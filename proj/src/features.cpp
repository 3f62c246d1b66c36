#include "stressprog/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <string>

#include "stressprog/errors.hpp"

namespace stressprog {

void MfccConfig::validate() const {
  if (n_coeffs <= 0 || n_coeffs > n_mels) throw std::invalid_argument("n_coeffs must be in [1, n_mels]");
  if (fmax > sample_rate / 2.0 || fmin < 0.0 || fmin >= fmax) {
    throw std::invalid_argument("mel range must satisfy 0 <= fmin < fmax <= sample_rate/2");
  }
  if (frame_len() <= 0 || frame_hop() <= 0 || frame_len() > n_fft) {
    throw std::invalid_argument("frame length must be positive and fit in n_fft");
  }
  if (window_samples() < static_cast<std::size_t>(frame_len())) {
    throw std::invalid_argument("window shorter than one frame");
  }
}

int MfccConfig::frame_len() const { return static_cast<int>(std::lround(frame_len_s * sample_rate)); }
int MfccConfig::frame_hop() const { return static_cast<int>(std::lround(frame_hop_s * sample_rate)); }

std::size_t MfccConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(window_s * sample_rate));
}

std::size_t MfccConfig::frame_count() const {
  return (window_samples() - static_cast<std::size_t>(frame_len())) / static_cast<std::size_t>(frame_hop()) + 1;
}

int MfccConfig::output_dim() const {
  const int per_frame = deltas ? 2 * n_coeffs : n_coeffs;
  return pooling == Pooling::MeanStd ? 2 * per_frame : per_frame;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(const MfccConfig& config) {
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.fmax);
  std::vector<double> hz(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(config.n_mels + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_centers(const MfccConfig& config) {
  auto edges = mel_edges(config);
  return {edges.begin() + 1, edges.end() - 1};
}

Eigen::MatrixXd mel_filterbank(const MfccConfig& config) {
  config.validate();
  const auto edges = mel_edges(config);
  const int bins = config.n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.n_mels, bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double lower = edges[m], center = edges[m + 1], upper = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * config.sample_rate / config.n_fft;
      const double rise = (f - lower) / (center - lower);
      const double fall = (upper - f) / (upper - center);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

Eigen::MatrixXd dct_basis(int n_out, int n_in) {
  Eigen::MatrixXd basis(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int i = 0; i < n_in; ++i) {
      basis(k, i) = scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n_in));
    }
  }
  return basis;
}

Eigen::MatrixXd delta_coefficients(const Eigen::MatrixXd& frames) {
  const Eigen::Index t_count = frames.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t_count, frames.cols());
  constexpr int kWidth = 2;
  constexpr double kNorm = 2.0 * (1 * 1 + 2 * 2);
  auto row = [&](Eigen::Index t) { return frames.row(std::clamp<Eigen::Index>(t, 0, t_count - 1)); };
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (int k = 1; k <= kWidth; ++k) out.row(t) += k * (row(t + k) - row(t - k));
  }
  return out / kNorm;
}

struct MfccExtractor::FftPlan {
  fftw_plan plan = nullptr;
  int n = 0;

  explicit FftPlan(int size) : n(size) {
    double* in = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw std::runtime_error("FFTW plan creation failed");
  }
  ~FftPlan() { fftw_destroy_plan(plan); }
};

MfccExtractor::MfccExtractor(MfccConfig config) : config_(config) {
  config_.validate();
  const int len = config_.frame_len();
  hann_.resize(len);
  for (int j = 0; j < len; ++j) hann_(j) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / len);
  filterbank_ = mel_filterbank(config_);
  dct_ = dct_basis(config_.n_coeffs, config_.n_mels);
  plan_ = std::make_unique<FftPlan>(config_.n_fft);
}

MfccExtractor::~MfccExtractor() = default;

Eigen::MatrixXd MfccExtractor::mel_energies(std::span<const float> window) const {
  if (window.size() != config_.window_samples()) {
    throw std::invalid_argument("expected " + std::to_string(config_.window_samples()) +
                                " samples per window, got " + std::to_string(window.size()));
  }
  const int len = config_.frame_len();
  const int hop = config_.frame_hop();
  const int bins = config_.n_fft / 2 + 1;
  const auto frames = static_cast<Eigen::Index>(config_.frame_count());

  std::vector<double> emphasized(window.size());
  emphasized[0] = window[0];
  for (std::size_t i = 1; i < window.size(); ++i) {
    emphasized[i] = static_cast<double>(window[i]) - config_.pre_emphasis * static_cast<double>(window[i - 1]);
  }

  // Buffers are per call so that concurrent callers never share them.
  double* in = fftw_alloc_real(static_cast<std::size_t>(config_.n_fft));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(bins));
  Eigen::MatrixXd energies(frames, config_.n_mels);
  Eigen::VectorXd magnitude(bins);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(hop);
    std::fill(in, in + config_.n_fft, 0.0);
    for (int j = 0; j < len; ++j) in[j] = emphasized[start + static_cast<std::size_t>(j)] * hann_(j);
    fftw_execute_dft_r2c(plan_->plan, in, out);
    for (int k = 0; k < bins; ++k) magnitude(k) = std::hypot(out[k][0], out[k][1]);
    energies.row(f) = (filterbank_ * magnitude).transpose();
  }
  fftw_free(in);
  fftw_free(out);
  return energies;
}

Eigen::MatrixXd MfccExtractor::frames(std::span<const float> window) const {
  const Eigen::MatrixXd log_mel =
      mel_energies(window).array().max(config_.log_floor).log().matrix();
  Eigen::MatrixXd cepstra = log_mel * dct_.transpose();
  if (!config_.deltas) return cepstra;
  Eigen::MatrixXd both(cepstra.rows(), 2 * cepstra.cols());
  both << cepstra, delta_coefficients(cepstra);
  return both;
}

Eigen::VectorXd MfccExtractor::window_vector(std::span<const float> window) const {
  return pool_window(frames(window), config_.pooling);
}

Eigen::VectorXd pool_window(const Eigen::MatrixXd& frames, Pooling pooling) {
  if (frames.rows() == 0) throw std::invalid_argument("cannot pool an empty frame matrix");
  const Eigen::VectorXd mean = frames.colwise().mean().transpose();
  if (pooling == Pooling::Mean) return mean;
  const Eigen::MatrixXd centered = frames.rowwise() - mean.transpose();
  const Eigen::VectorXd stddev =
      (centered.array().square().colwise().sum() / static_cast<double>(frames.rows())).sqrt().transpose();
  Eigen::VectorXd out(2 * mean.size());
  out << mean, stddev;
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::size_t kFseqHeader = 16;

}  // namespace

std::vector<std::uint8_t> encode_fseq(const Eigen::MatrixXd& rows) {
  std::vector<std::uint8_t> out;
  out.reserve(kFseqHeader + static_cast<std::size_t>(rows.size()) * 4);
  for (char ch : {'F', 'S', 'E', 'Q'}) out.push_back(static_cast<std::uint8_t>(ch));
  put_u32(out, kFseqVersion);
  put_u32(out, static_cast<std::uint32_t>(rows.rows()));
  put_u32(out, static_cast<std::uint32_t>(rows.cols()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(rows(r, c))));
    }
  }
  return out;
}

void write_fseq(const std::filesystem::path& path, const Eigen::MatrixXd& rows) {
  const auto bytes = encode_fseq(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureSequence decode_fseq(std::span<const std::uint8_t> bytes, int expected_dim) {
  if (bytes.size() < kFseqHeader || std::memcmp(bytes.data(), "FSEQ", 4) != 0) {
    throw DataError("not an FSEQ feature file");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFseqVersion) throw DataError("unsupported FSEQ version " + std::to_string(version));
  const std::uint32_t rows = get_u32(bytes.data() + 8);
  const std::uint32_t cols = get_u32(bytes.data() + 12);
  if (expected_dim > 0 && cols != static_cast<std::uint32_t>(expected_dim)) {
    throw DataError("feature dimension mismatch: file has " + std::to_string(cols) + ", expected " +
                    std::to_string(expected_dim));
  }
  const std::size_t payload = static_cast<std::size_t>(rows) * cols * 4;
  if (bytes.size() < kFseqHeader + payload) throw DataError("truncated FSEQ payload");
  if (bytes.size() > kFseqHeader + payload) throw DataError("trailing bytes after FSEQ payload");
  FeatureSequence seq;
  seq.vectors.resize(rows, cols);
  const std::uint8_t* p = bytes.data() + kFseqHeader;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, p += 4) {
      const float v = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(v)) {
        throw DataError("non-finite value at row " + std::to_string(r) + ", col " + std::to_string(c));
      }
      seq.vectors(r, c) = v;
    }
  }
  seq.window_refs.resize(rows);
  for (std::uint32_t r = 0; r < rows; ++r) seq.window_refs[r] = r;
  return seq;
}

FeatureSequence load_embeddings(const std::filesystem::path& path, int expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_fseq(bytes, expected_dim);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace stressprog
