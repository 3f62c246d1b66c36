#include "stressprog/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "stressprog/errors.hpp"

namespace stressprog {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("truncated checkpoint");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct DirectoryEntry {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint64_t offset = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
  const ModelShape& s = params.shape;
  std::vector<std::uint8_t> out;
  for (char ch : {'S', 'P', 'C', 'K'}) out.push_back(static_cast<std::uint8_t>(ch));
  put_u32(out, kCheckpointVersion);
  put_u32(out, s.arch == Architecture::Recurrent ? 0u : 1u);
  for (int v : {s.input_dim, s.hidden, s.heads, s.layers, s.context_layers, s.ff_dim}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u32(out, s.positional_encoding ? 1u : 0u);

  std::uint32_t count = 0;
  params.visit([&](const std::string&, const Tensor&) { ++count; });
  put_u32(out, count);
  std::uint64_t offset = 0;
  params.visit([&](const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
    put_u64(out, offset);
    offset += static_cast<std::uint64_t>(t.size()) * 4;
  });
  params.visit([&](const std::string&, const Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t.data()[i])));
    }
  });
  put_u32(out, crc32_of(out));
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "SPCK", 4) != 0) throw DataError("not an SPCK checkpoint");
  Reader crc_reader(bytes.subspan(bytes.size() - 4));
  if (crc_reader.u32() != crc32_of(bytes.first(bytes.size() - 4))) throw DataError("checkpoint CRC mismatch");

  Reader r(bytes.first(bytes.size() - 4));
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  ModelShape shape;
  const std::uint32_t arch = r.u32();
  if (arch > 1) throw DataError("unknown architecture tag " + std::to_string(arch));
  shape.arch = arch == 0 ? Architecture::Recurrent : Architecture::Transformer;
  shape.input_dim = static_cast<int>(r.u32());
  shape.hidden = static_cast<int>(r.u32());
  shape.heads = static_cast<int>(r.u32());
  shape.layers = static_cast<int>(r.u32());
  shape.context_layers = static_cast<int>(r.u32());
  shape.ff_dim = static_cast<int>(r.u32());
  shape.positional_encoding = (r.u32() & 1u) != 0;

  ModelParams params;
  try {
    params = ModelParams::zeros(shape);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint shape is invalid: ") + e.what());
  }

  const std::uint32_t count = r.u32();
  std::map<std::string, DirectoryEntry> directory;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    std::string name = r.str(len);
    DirectoryEntry entry;
    entry.rows = r.u32();
    entry.cols = r.u32();
    entry.offset = r.u64();
    directory.emplace(std::move(name), entry);
  }
  const std::size_t payload_start = r.pos();
  const std::size_t payload_size = bytes.size() - 4 - payload_start;

  std::size_t expected = 0;
  std::uint32_t visited = 0;
  params.visit([&](const std::string& name, Tensor& t) {
    const auto it = directory.find(name);
    if (it == directory.end()) throw DataError("checkpoint lacks tensor " + name);
    const DirectoryEntry& e = it->second;
    if (e.rows != t.rows() || e.cols != t.cols()) throw DataError("checkpoint tensor " + name + " has wrong shape");
    const std::size_t size = static_cast<std::size_t>(t.size()) * 4;
    if (e.offset + size > payload_size) throw DataError("checkpoint tensor " + name + " exceeds payload");
    const std::uint8_t* p = bytes.data() + payload_start + e.offset;
    for (Eigen::Index i = 0; i < t.size(); ++i, p += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
      t.data()[i] = std::bit_cast<float>(bits);
    }
    expected += size;
    ++visited;
  });
  if (visited != count || directory.size() != count || expected != payload_size) {
    throw DataError("checkpoint directory does not match the architecture");
  }
  if (!params.all_finite()) throw DataError("checkpoint holds non-finite values");
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ModelParams round_to_f32(const ModelParams& params) {
  ModelParams out = params;
  out.visit([](const std::string&, Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(t.data()[i]);
  });
  return out;
}

}  // namespace stressprog
