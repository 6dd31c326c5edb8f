#include "rcodean/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace rcodean {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t next_uint() {
    skip_ws_and_comments();
    std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw FormatError("PGM: header value out of range");
      ++pos_;
    }
    if (pos_ == start) throw FormatError("PGM: malformed header");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("PGM: missing whitespace before raster");
    }
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_ws_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Mat decode_pgm(std::span<const std::uint8_t> bytes) {
  PgmHeaderReader reader(bytes);
  reader.skip(2);
  const std::size_t width = reader.next_uint();
  const std::size_t height = reader.next_uint();
  const std::size_t maxval = reader.next_uint();
  if (width == 0 || height == 0) throw FormatError("PGM: zero dimension");
  if (maxval != 255) throw FormatError("PGM: only maxval 255 is supported");
  const std::size_t offset = reader.raster_offset();
  if (bytes.size() < offset + width * height) throw FormatError("PGM: truncated pixel data");
  Mat img(height, width);
  for (std::size_t i = 0; i < width * height; ++i) img[i] = bytes[offset + i];
  return img;
}

Mat decode_packed(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("packed image: truncated header");
  const std::size_t height = bytes[4] | (bytes[5] << 8);
  const std::size_t width = bytes[6] | (bytes[7] << 8);
  if (width == 0 || height == 0) throw FormatError("packed image: zero dimension");
  if (bytes.size() < 8 + width * height) throw FormatError("packed image: truncated pixel data");
  Mat img(height, width);
  for (std::size_t i = 0; i < width * height; ++i) img[i] = bytes[8 + i];
  return img;
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

Mat decode_gray_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPackedMagic, 4) == 0) {
    return decode_packed(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '5') return decode_pgm(bytes);
    throw FormatError(std::string("PGM variant P") + static_cast<char>(bytes[1]) +
                      " is not supported (only binary P5)");
  }
  throw FormatError("unknown image format");
}

Mat load_gray_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("image not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_gray_image(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const Mat& image) {
  const std::string header =
      "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.values()) out.push_back(to_byte(v));
  return out;
}

std::vector<std::uint8_t> encode_packed(const Mat& image) {
  if (image.rows() > 0xFFFF || image.cols() > 0xFFFF) {
    throw FormatError("packed image: dimensions exceed 65535");
  }
  std::vector<std::uint8_t> out(kPackedMagic, kPackedMagic + 4);
  out.push_back(static_cast<std::uint8_t>(image.rows() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(image.rows() >> 8));
  out.push_back(static_cast<std::uint8_t>(image.cols() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(image.cols() >> 8));
  for (double v : image.values()) out.push_back(to_byte(v));
  return out;
}

void save_pgm(const Mat& image, const std::filesystem::path& path) {
  write_bytes(encode_pgm(image), path);
}

void save_packed(const Mat& image, const std::filesystem::path& path) {
  write_bytes(encode_packed(image), path);
}

}  // namespace rcodean
