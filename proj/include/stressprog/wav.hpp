#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace stressprog {

inline constexpr int kSampleRate = 16000;

struct PcmAudio {
  std::vector<float> samples;  // normalised to [-1, 1)
  int sample_rate = kSampleRate;
};

// Reads a RIFF/WAVE file holding 16-bit signed little-endian mono PCM at
// 16 kHz. Any other layout is rejected with DataError; no resampling.
PcmAudio read_wav(const std::filesystem::path& path);

// Same checks, from an in-memory image of the file.
PcmAudio parse_wav(std::span<const std::uint8_t> bytes);

// Number of samples only; reads the headers and skips the payload.
std::size_t wav_sample_count(const std::filesystem::path& path);

// Writes 16-bit mono PCM. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               int sample_rate = kSampleRate);

}  // namespace stressprog
