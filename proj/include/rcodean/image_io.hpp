#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "rcodean/mat.hpp"

namespace rcodean {

/// Unsupported or damaged image file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Magic bytes of the packed raw format: "RCIM", u16 height, u16 width
/// (little-endian), then height*width u8 pixels row-major.
inline constexpr char kPackedMagic[4] = {'R', 'C', 'I', 'M'};

/// Decodes binary PGM (P5, maxval 255) or the packed raw format into an
/// H x W matrix of raw 0-255 values. RGB sources must be converted upstream
/// with Y = 0.299 R + 0.587 G + 0.114 B.
Mat decode_gray_image(std::span<const std::uint8_t> bytes);
Mat load_gray_image(const std::filesystem::path& path);

/// Pixels are rounded and clamped to 0-255.
std::vector<std::uint8_t> encode_pgm(const Mat& image);
std::vector<std::uint8_t> encode_packed(const Mat& image);
void save_pgm(const Mat& image, const std::filesystem::path& path);
void save_packed(const Mat& image, const std::filesystem::path& path);

}  // namespace rcodean
