#include "rcodean/ensemble.hpp"

#include <stdexcept>

namespace rcodean {

Bits threshold_bits(std::span<const double> probabilities) {
  Bits out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    out[i] = probabilities[i] > kDecisionThreshold ? 1 : 0;
  }
  return out;
}

Bits ensemble_vote(const Bits& mlp, const Bits& forest, const Bits& svm) {
  if (mlp.size() != forest.size() || mlp.size() != svm.size()) {
    throw std::invalid_argument("ensemble_vote: prediction lengths differ");
  }
  Bits out(mlp.size());
  for (std::size_t a = 0; a < mlp.size(); ++a) {
    const int votes = (mlp[a] != 0) + (forest[a] != 0) + (svm[a] != 0);
    out[a] = votes >= 2 ? 1 : 0;
  }
  return out;
}

}  // namespace rcodean
