#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcodean/dataset.hpp"

namespace rcodean {

inline constexpr std::size_t kMaxSyntheticAttributes = 8;

/// Pixel rectangle [row0, row0 + rows) x [col0, col0 + cols).
struct Region {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  bool overlaps(const Region& other) const;
};

/// Names of the procedural attributes, in generator order.
const std::vector<std::string>& synthetic_attribute_names();

/// Bounding box of where attribute `attr` (0-based) alters pixels, or
/// nullopt for the global brightness attribute.
std::optional<Region> synthetic_footprint(std::size_t attr);

/// Procedural 64x64 "faces" with planted binary attributes, each present
/// independently with probability 0.5:
///   0 bright 20x20 square in the top-left corner
///   1 horizontal bar in the bottom third
///   2 global brightness shift
///   3 vertical bar on the right side
///   4 dark square in the center
///   5 diagonal stroke in the top-right
///   6 bright disc on the left
///   7 short bar at the top middle
/// Every image also carries a jittered face ellipse, a random illumination
/// ramp, zero-mean smooth blobs, and Gaussian pixel noise (sigma 0.05 on the [0,1] scale). Images are
/// stored in memory as raw 0-255 values. Throws ConfigError when k > 8.
AttributeDataset gen_synthetic(std::size_t n, std::size_t k, std::uint64_t seed,
                               SplitFractions fractions = {});

}  // namespace rcodean
