#pragma once

#include <cstdint>

#include "rcodean/mat.hpp"

namespace rcodean {

/// One linear max-margin classifier per attribute: decision w.f + b > 0.
struct LinearSvm {
  Mat weights;  // attributes x F
  Mat bias;     // attributes x 1

  bool empty() const { return weights.empty(); }
  std::size_t num_attributes() const { return weights.rows(); }
  std::size_t num_features() const { return weights.cols(); }

  /// Raw margins w.f + b, attributes x N.
  Mat margins(const Mat& features) const;
};

struct SvmConfig {
  std::size_t epochs = 20;
  double reg = 1e-3;
  std::uint64_t seed = 0;
};

/// Pegasos: hinge loss + (reg/2)||w||^2 minimized by stochastic subgradient
/// steps with rate 1/(reg * t), visiting samples in a seeded shuffle each
/// epoch. The bias is learned as the weight of a constant unit feature.
/// Labels are attributes x N with 0/1 entries, mapped to -1/+1 internally.
LinearSvm svm_train(const Mat& features, const Mat& labels, const SvmConfig& config);

}  // namespace rcodean
