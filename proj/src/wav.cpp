#include "stressprog/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "stressprog/errors.hpp"

namespace stressprog {
namespace {

constexpr std::uint16_t kFormatPcm = 1;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

struct DataChunk {
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Walks the chunk list and validates the fmt chunk. Returns the data chunk
// location relative to the start of `bytes`.
DataChunk locate_data(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* header = bytes.data() + pos;
    const std::size_t size = read_u32(header + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(header, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw DataError("truncated fmt chunk");
      const std::uint8_t* fmt = bytes.data() + body;
      const auto format = read_u16(fmt);
      const auto channels = read_u16(fmt + 2);
      const auto rate = read_u32(fmt + 4);
      const auto bits = read_u16(fmt + 14);
      if (format != kFormatPcm) throw DataError("unsupported WAV format tag " + std::to_string(format));
      if (channels != 1) throw DataError("expected mono audio, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw DataError("expected 16-bit PCM, got " + std::to_string(bits) + " bits");
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw DataError("expected 16000 Hz audio, got " + std::to_string(rate) + " Hz");
      }
      have_fmt = true;
    } else if (std::memcmp(header, "data", 4) == 0) {
      if (!have_fmt) throw DataError("data chunk precedes fmt chunk");
      // Streams written without a final size carry 0 or 0xFFFFFFFF here.
      const std::size_t available = bytes.size() - body;
      const std::size_t usable = std::min(size, available);
      return {body, usable - usable % 2};
    }
    pos = body + size + (size & 1);
  }
  throw DataError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

PcmAudio parse_wav(std::span<const std::uint8_t> bytes) {
  const DataChunk data = locate_data(bytes);
  PcmAudio audio;
  audio.samples.resize(data.size / 2);
  const std::uint8_t* p = bytes.data() + data.offset;
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const auto raw = static_cast<std::int16_t>(read_u16(p + 2 * i));
    audio.samples[i] = static_cast<float>(raw) / 32768.0f;
  }
  return audio;
}

PcmAudio read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return parse_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::size_t wav_sample_count(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  // Headers are small; 64 KiB is enough to hold fmt plus typical metadata.
  std::vector<std::uint8_t> head(1 << 16);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  in.clear();
  in.seekg(0, std::ios::end);
  const auto total = static_cast<std::size_t>(in.tellg());
  try {
    // The declared data size comes from the header; clamp it to the file.
    const DataChunk data = locate_data(head);
    std::size_t claimed = read_u32(head.data() + data.offset - 4);
    claimed = std::min(claimed, total - data.offset);
    return (claimed - claimed % 2) / 2;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               int sample_rate) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : samples) {
    const float clipped = std::clamp(s, -1.0f, 1.0f);
    const auto v = static_cast<std::int16_t>(std::lround(std::min(clipped * 32768.0f, 32767.0f)));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write WAV file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace stressprog
