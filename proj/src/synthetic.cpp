#include "rcodean/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rcodean/errors.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

namespace {

constexpr std::size_t kSide = 64;
constexpr double kNoiseSigma = 0.05;
constexpr double kPlanted = 0.35;
constexpr double kBrightShift = 0.10;
// Smooth random blobs, recentred to zero image mean: they move patch means
// around but leave the full-face mean alone, so a global brightness change
// is far clearer at full-face scale than in any single patch.
constexpr std::size_t kNumBlobs = 10;
constexpr double kBlobAmplitude = 0.3;

const std::array<std::optional<Region>, kMaxSyntheticAttributes> kFootprints = {
    Region{2, 2, 20, 20},    // top-left square
    Region{48, 8, 6, 48},    // bottom bar
    std::nullopt,            // brightness
    Region{12, 52, 40, 6},   // right bar
    Region{26, 26, 12, 12},  // center dark square
    Region{4, 36, 21, 26},   // top-right diagonal
    Region{35, 3, 11, 11},   // left disc
    Region{6, 24, 4, 17},    // top-middle bar
};

void add_rect(Mat& img, const Region& r, double v) {
  for (std::size_t i = r.row0; i < r.row0 + r.rows; ++i)
    for (std::size_t j = r.col0; j < r.col0 + r.cols; ++j) img(i, j) += v;
}

void add_disc(Mat& img, double cr, double cc, double radius, double v) {
  for (std::size_t i = 0; i < kSide; ++i)
    for (std::size_t j = 0; j < kSide; ++j) {
      const double dr = static_cast<double>(i) - cr;
      const double dc = static_cast<double>(j) - cc;
      if (dr * dr + dc * dc <= radius * radius) img(i, j) += v;
    }
}

// Stroke from (4, 36) to (24, 60), two pixels thick.
void add_diagonal(Mat& img, double v) {
  for (std::size_t i = 4; i <= 24; ++i) {
    const double c = 36.0 + (static_cast<double>(i) - 4.0) * 24.0 / 20.0;
    const auto c0 = static_cast<std::size_t>(std::lround(c));
    img(i, c0) += v;
    img(i, c0 + 1) += v;
  }
}

void plant(Mat& img, std::size_t attr) {
  switch (attr) {
    case 0: add_rect(img, *kFootprints[0], kPlanted); break;
    case 1: add_rect(img, *kFootprints[1], kPlanted); break;
    case 2:
      for (double& p : img.values()) p += kBrightShift;
      break;
    case 3: add_rect(img, *kFootprints[3], kPlanted); break;
    case 4: add_rect(img, *kFootprints[4], -0.25); break;
    case 5: add_diagonal(img, kPlanted); break;
    case 6: add_disc(img, 40.0, 8.0, 5.0, kPlanted); break;
    case 7: add_rect(img, *kFootprints[7], kPlanted); break;
    default: break;
  }
}

}  // namespace

bool Region::overlaps(const Region& o) const {
  return row0 < o.row0 + o.rows && o.row0 < row0 + rows && col0 < o.col0 + o.cols &&
         o.col0 < col0 + cols;
}

const std::vector<std::string>& synthetic_attribute_names() {
  static const std::vector<std::string> names = {
      "Top_Left_Square", "Bottom_Bar",    "Bright",        "Right_Bar",
      "Center_Dark",     "Top_Right_Diagonal", "Left_Disc", "Top_Middle_Bar"};
  return names;
}

std::optional<Region> synthetic_footprint(std::size_t attr) { return kFootprints.at(attr); }

AttributeDataset gen_synthetic(std::size_t n, std::size_t k, std::uint64_t seed,
                               SplitFractions fractions) {
  if (k == 0 || k > kMaxSyntheticAttributes) {
    throw ConfigError("synthetic data supports 1 to " + std::to_string(kMaxSyntheticAttributes) +
                      " attributes, got " + std::to_string(k));
  }
  AttributeDataset ds;
  const auto& names = synthetic_attribute_names();
  ds.attribute_names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(k));
  ds.records.reserve(n);
  ds.images.reserve(n);

  Rng rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    AttributeRecord rec;
    char name[32];
    std::snprintf(name, sizeof name, "synth_%06zu.pgm", s + 1);
    rec.image = name;
    rec.labels.resize(k);
    for (auto& l : rec.labels) l = rng.bernoulli(0.5) ? 1 : 0;

    Mat img(kSide, kSide, 0.30);
    const double ecr = 32.0 + rng.uniform(-2.0, 2.0);
    const double ecc = 32.0 + rng.uniform(-2.0, 2.0);
    const double slope = rng.uniform(-0.12, 0.12);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < kSide; ++i) {
      for (std::size_t j = 0; j < kSide; ++j) {
        const double di = static_cast<double>(i) - ecr;
        const double dj = static_cast<double>(j) - ecc;
        if ((di * di) / (28.0 * 28.0) + (dj * dj) / (22.0 * 22.0) <= 1.0) img(i, j) += 0.12;
        const double u = (static_cast<double>(i) - 31.5) / 32.0;
        const double v = (static_cast<double>(j) - 31.5) / 32.0;
        img(i, j) += slope * (u * std::cos(theta) + v * std::sin(theta));
      }
    }
    Mat field(kSide, kSide);
    for (std::size_t b = 0; b < kNumBlobs; ++b) {
      const double br = rng.uniform(-8.0, 72.0);
      const double bc = rng.uniform(-8.0, 72.0);
      const double sigma = rng.uniform(6.0, 12.0);
      const double amp = rng.uniform(-kBlobAmplitude, kBlobAmplitude);
      for (std::size_t i = 0; i < kSide; ++i) {
        for (std::size_t j = 0; j < kSide; ++j) {
          const double dr = static_cast<double>(i) - br;
          const double dc = static_cast<double>(j) - bc;
          field(i, j) += amp * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
        }
      }
    }
    const double field_mean = field.sum() / static_cast<double>(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) img[i] += field[i] - field_mean;
    for (std::size_t a = 0; a < k; ++a) {
      if (rec.labels[a]) plant(img, a);
    }
    for (double& p : img.values()) {
      p = std::clamp(p + kNoiseSigma * rng.normal(), 0.0, 1.0) * 255.0;
    }
    ds.records.push_back(std::move(rec));
    ds.images.push_back(std::move(img));
  }
  assign_splits(ds, fractions);
  ds.validate();
  return ds;
}

}  // namespace rcodean
