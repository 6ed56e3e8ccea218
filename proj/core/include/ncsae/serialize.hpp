#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ncsae/autoencoder.hpp"
#include "ncsae/training.hpp"

namespace ncsae {

// Parameter container, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "NCSAEPRM"
//   8       4     format version (kParamFormatVersion)
//   12      4     kind: 1 = autoencoder, 2 = stacked network
//   16      4     block count B
//   then B blocks:
//           4     name length L
//           L     name bytes (ASCII)
//           8     rows
//           8     cols
//           8*rows*cols  IEEE-754 binary64 payload, row-major
//   last    4     CRC-32 (zlib polynomial) of every preceding byte
//
// Bias vectors are stored as 1 x n blocks. Autoencoder blocks are named
// w1, bx, w2, bh. Network blocks are enc<i>.w1, enc<i>.bx, enc<i>.w2,
// enc<i>.bh for each encoder i (0-based), then softmax.w and softmax.b.

inline constexpr std::uint32_t kParamFormatVersion = 1;

enum class ParamKind : std::uint32_t { kAutoencoder = 1, kNetwork = 2 };

struct ParamBlock {
  std::string name;
  Matrix value;
};

std::vector<std::uint8_t> encode_params(ParamKind kind, std::span<const ParamBlock> blocks);

struct DecodedParams {
  ParamKind kind;
  std::vector<ParamBlock> blocks;
};

/// Throws DataError (kBadMagic, kTruncated, kChecksum, kFormat).
DecodedParams decode_params(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ae_params(const AeParams& params);
AeParams decode_ae_params(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_network(const StackedNetwork& net);
StackedNetwork decode_network(std::span<const std::uint8_t> bytes);

void save_ae_params(const AeParams& params, const std::filesystem::path& path);
AeParams load_ae_params(const std::filesystem::path& path);
void save_network(const StackedNetwork& net, const std::filesystem::path& path);
StackedNetwork load_network(const std::filesystem::path& path);

}  // namespace ncsae
