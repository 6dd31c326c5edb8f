#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcodean/net.hpp"

namespace rcodean {

struct GradcheckConfig {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t input_dim = 12;
  std::size_t hidden_dim = 8;
  std::size_t batch = 4;
  CodeanParams params{.alpha = 1.0, .beta = 0.5, .lambda = 0.01};
  double step = 1e-6;
  double abs_tol = 1e-6;
  double rel_tol = 1e-4;
  BackwardOptions backward;
};

/// Worst error seen for one parameter array name across all trials.
struct GradcheckGroup {
  std::string name;
  double worst_abs = 0.0;
  double worst_rel = 0.0;  // err / max(scale, abs_tol / rel_tol)
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  std::size_t checked = 0;
  bool passed = true;
  /// "trial 3 dec2.weight[5,1]" for the first entry outside tolerance.
  std::string first_failure;

  double worst_rel() const;
};

/// Compares net_backward against central differences of the codean loss on
/// random networks with all default skips. An entry passes when
/// |analytic - numeric| <= max(abs_tol, rel_tol * max(|analytic|, |numeric|)).
/// Throws UsageError when trials is zero.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

}  // namespace rcodean
