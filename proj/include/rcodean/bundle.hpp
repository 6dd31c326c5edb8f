#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rcodean/pipeline.hpp"

namespace rcodean {

/// Whole-file checksum mismatch or structurally broken bundle.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bundle written by an unknown format version.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kBundleMagic[8] = {'R', 'C', 'O', 'D', 'E', 'A', 'N', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;

/// Container layout, all integers little-endian:
///   8 bytes   magic "RCODEANB"
///   u32       format version
///   u64       header length, then the header as JSON text (config,
///             attribute names, model structure, array names in order)
///   u64       array count, then per array: u64 name length, name,
///             u64 rows, u64 cols, rows*cols IEEE-754 doubles
///   u32       CRC-32 of every preceding byte
std::vector<std::uint8_t> encode_bundle(const AttributeModel& model);
AttributeModel decode_bundle(const std::vector<std::uint8_t>& bytes);

void save_bundle(const AttributeModel& model, const std::filesystem::path& path);
AttributeModel load_bundle(const std::filesystem::path& path);
/// As load_bundle, but throws ConfigError unless the bundle predicts
/// exactly `expected_attributes` attributes.
AttributeModel load_bundle(const std::filesystem::path& path, std::size_t expected_attributes);

}  // namespace rcodean
