#include "ncsae/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "ncsae/error.hpp"

namespace ncsae {

namespace {

using Kind = DataError::Kind;

constexpr char kMagic[8] = {'N', 'C', 'S', 'A', 'E', 'P', 'R', 'M'};

static_assert(std::endian::native == std::endian::little,
              "parameter files are written with native little-endian doubles");

class Writer {
 public:
  void u32(std::uint32_t v) { put(&v, 4); }
  void u64(std::uint64_t v) { put(&v, 8); }
  void f64(double v) { put(&v, 8); }
  void bytes(const void* p, std::size_t n) { put(p, n); }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError(Kind::kTruncated, "parameter file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

Matrix as_row(const Vector& v) { return Matrix(1, v.size(), v); }

Vector as_vector(const Matrix& m, const std::string& name) {
  if (m.rows() != 1) throw DataError(Kind::kFormat, "block '" + name + "' is not a row vector");
  return Vector(m.data().begin(), m.data().end());
}

const Matrix& find_block(const DecodedParams& d, const std::string& name) {
  for (const auto& b : d.blocks)
    if (b.name == name) return b.value;
  throw DataError(Kind::kFormat, "parameter file lacks block '" + name + "'");
}

void append_ae(std::vector<ParamBlock>& blocks, const AeParams& p, const std::string& prefix) {
  blocks.push_back({prefix + "w1", p.w1});
  blocks.push_back({prefix + "bx", as_row(p.bx)});
  blocks.push_back({prefix + "w2", p.w2});
  blocks.push_back({prefix + "bh", as_row(p.bh)});
}

AeParams extract_ae(const DecodedParams& d, const std::string& prefix) {
  AeParams p;
  p.w1 = find_block(d, prefix + "w1");
  p.bx = as_vector(find_block(d, prefix + "bx"), prefix + "bx");
  p.w2 = find_block(d, prefix + "w2");
  p.bh = as_vector(find_block(d, prefix + "bh"), prefix + "bh");
  p.check_shapes();
  return p;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Kind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(Kind::kIo, "write failed for " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_params(ParamKind kind, std::span<const ParamBlock> blocks) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kParamFormatVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.u32(static_cast<std::uint32_t>(b.name.size()));
    w.bytes(b.name.data(), b.name.size());
    w.u64(b.value.rows());
    w.u64(b.value.cols());
    for (double v : b.value.data()) w.f64(v);
  }
  w.u32(crc(w.buffer()));
  return std::move(w.buffer());
}

DecodedParams decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw DataError(Kind::kBadMagic, "not a parameter file (bad magic)");
  if (bytes.size() < sizeof kMagic + 16) throw DataError(Kind::kTruncated, "parameter file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc(body) != stored) throw DataError(Kind::kChecksum, "parameter file checksum mismatch");

  Reader r(body.subspan(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kParamFormatVersion) {
    throw DataError(Kind::kFormat, "unsupported parameter format version " + std::to_string(version));
  }
  DecodedParams out;
  const std::uint32_t kind = r.u32();
  if (kind != 1 && kind != 2) throw DataError(Kind::kFormat, "unknown parameter kind " + std::to_string(kind));
  out.kind = static_cast<ParamKind>(kind);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamBlock b;
    b.name = r.str(r.u32());
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols)
      throw DataError(Kind::kTruncated, "block '" + b.name + "' payload truncated");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.f64();
    b.value = Matrix(rows, cols, std::move(data));
    out.blocks.push_back(std::move(b));
  }
  if (r.remaining() != 0) throw DataError(Kind::kFormat, "trailing bytes in parameter file");
  return out;
}

std::vector<std::uint8_t> encode_ae_params(const AeParams& params) {
  params.check_shapes();
  std::vector<ParamBlock> blocks;
  append_ae(blocks, params, "");
  return encode_params(ParamKind::kAutoencoder, blocks);
}

AeParams decode_ae_params(std::span<const std::uint8_t> bytes) {
  const auto d = decode_params(bytes);
  if (d.kind != ParamKind::kAutoencoder) throw DataError(Kind::kFormat, "file holds a network, not an autoencoder");
  return extract_ae(d, "");
}

std::vector<std::uint8_t> encode_network(const StackedNetwork& net) {
  net.check_shapes();
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < net.encoders.size(); ++i)
    append_ae(blocks, net.encoders[i], "enc" + std::to_string(i) + ".");
  blocks.push_back({"softmax.w", net.softmax_w});
  blocks.push_back({"softmax.b", as_row(net.softmax_b)});
  return encode_params(ParamKind::kNetwork, blocks);
}

StackedNetwork decode_network(std::span<const std::uint8_t> bytes) {
  const auto d = decode_params(bytes);
  if (d.kind != ParamKind::kNetwork) throw DataError(Kind::kFormat, "file holds an autoencoder, not a network");
  if (d.blocks.size() < 6 || (d.blocks.size() - 2) % 4 != 0)
    throw DataError(Kind::kFormat, "network file has " + std::to_string(d.blocks.size()) + " blocks");
  StackedNetwork net;
  const std::size_t layers = (d.blocks.size() - 2) / 4;
  for (std::size_t i = 0; i < layers; ++i)
    net.encoders.push_back(extract_ae(d, "enc" + std::to_string(i) + "."));
  net.softmax_w = find_block(d, "softmax.w");
  net.softmax_b = as_vector(find_block(d, "softmax.b"), "softmax.b");
  try {
    net.check_shapes();
  } catch (const ShapeError& e) {
    throw DataError(Kind::kFormat, std::string("network file: ") + e.what());
  }
  return net;
}

void save_ae_params(const AeParams& params, const std::filesystem::path& path) {
  write_all(path, encode_ae_params(params));
}

AeParams load_ae_params(const std::filesystem::path& path) {
  return decode_ae_params(read_all(path));
}

void save_network(const StackedNetwork& net, const std::filesystem::path& path) {
  write_all(path, encode_network(net));
}

StackedNetwork load_network(const std::filesystem::path& path) {
  return decode_network(read_all(path));
}

}  // namespace ncsae
