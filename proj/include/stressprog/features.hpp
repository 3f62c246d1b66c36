#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace stressprog {

inline constexpr int kMfccDim = 40;
inline constexpr int kEmbeddingDim = 1024;

enum class Pooling { Mean, MeanStd };

struct MfccConfig {
  double window_s = 10.0;
  double frame_len_s = 0.025;
  double frame_hop_s = 0.010;
  int n_fft = 512;
  int n_mels = 64;
  int n_coeffs = 40;
  double pre_emphasis = 0.97;
  double fmin = 0.0;
  double fmax = 8000.0;
  int sample_rate = 16000;
  double log_floor = 1e-10;
  bool deltas = false;  // append delta coefficients (doubles the dimension)
  Pooling pooling = Pooling::Mean;

  void validate() const;
  int frame_len() const;
  int frame_hop() const;
  std::size_t window_samples() const;
  // floor((window_samples - frame_len) / frame_hop) + 1
  std::size_t frame_count() const;
  // Per-window vector size after pooling.
  int output_dim() const;
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Centre frequencies (Hz) of the n_mels triangular filters.
std::vector<double> mel_centers(const MfccConfig& config);

// n_mels x (n_fft/2 + 1) triangular filterbank on the HTK mel scale.
Eigen::MatrixXd mel_filterbank(const MfccConfig& config);

// Orthonormal DCT-II basis, rows = output coefficients.
Eigen::MatrixXd dct_basis(int n_out, int n_in);

// Regression deltas over +-2 frames with edge replication; rows are frames.
Eigen::MatrixXd delta_coefficients(const Eigen::MatrixXd& frames);

class MfccExtractor {
 public:
  explicit MfccExtractor(MfccConfig config = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  const MfccConfig& config() const { return config_; }

  // frame_count() x n_mels filterbank energies (before the log).
  Eigen::MatrixXd mel_energies(std::span<const float> window) const;

  // frame_count() x n_coeffs cepstra; with deltas enabled the delta block is
  // appended column-wise. Throws std::invalid_argument on a wrong sample count.
  Eigen::MatrixXd frames(std::span<const float> window) const;

  // Pooled per-window vector of size config().output_dim().
  Eigen::VectorXd window_vector(std::span<const float> window) const;

 private:
  struct FftPlan;

  MfccConfig config_;
  Eigen::VectorXd hann_;
  Eigen::MatrixXd filterbank_;
  Eigen::MatrixXd dct_;
  std::unique_ptr<FftPlan> plan_;
};

// Column means over frames. Throws std::invalid_argument on zero frames.
Eigen::VectorXd pool_window(const Eigen::MatrixXd& frames, Pooling pooling = Pooling::Mean);

// One feature vector per window, row-major: rows = windows.
struct FeatureSequence {
  Eigen::MatrixXd vectors;
  std::vector<std::size_t> window_refs;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

// "FSEQ" file: magic, u32 version (1), u32 rows, u32 cols, then row-major
// little-endian float32 values.
inline constexpr std::uint32_t kFseqVersion = 1;

void write_fseq(const std::filesystem::path& path, const Eigen::MatrixXd& rows);
std::vector<std::uint8_t> encode_fseq(const Eigen::MatrixXd& rows);

// Throws DataError on bad magic/version, truncation, trailing bytes,
// non-finite values or when cols != expected_dim (expected_dim <= 0 skips
// the dimension check).
FeatureSequence load_embeddings(const std::filesystem::path& path, int expected_dim = kEmbeddingDim);
FeatureSequence decode_fseq(std::span<const std::uint8_t> bytes, int expected_dim = kEmbeddingDim);

}  // namespace stressprog
