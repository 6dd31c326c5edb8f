#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rcodean {

/// One 0/1 decision per attribute.
using Bits = std::vector<std::uint8_t>;

/// Probability-to-bit cut used by every classifier: p > 0.5 is positive.
inline constexpr double kDecisionThreshold = 0.5;

Bits threshold_bits(std::span<const double> probabilities);

/// Per-attribute majority of three binary predictions.
Bits ensemble_vote(const Bits& mlp, const Bits& forest, const Bits& svm);

}  // namespace rcodean
