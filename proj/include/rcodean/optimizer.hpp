#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcodean/mat.hpp"

namespace rcodean {

/// A gradient contained NaN or Inf; the step was not applied.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient for parameter '" + param + "'"), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One parameter array paired with its gradient for an optimizer step.
struct ParamRef {
  std::string name;
  Mat* value = nullptr;
  const Mat* grad = nullptr;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Applies one update in place. All gradients are checked before any
  /// parameter changes.
  void step(const std::vector<ParamRef>& params);

  double lr() const { return config_.lr; }
  void set_lr(double lr);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

/// Reduce-on-plateau learning-rate schedule driven by epoch training loss.
///
/// An epoch improves when its loss is below best - threshold. After
/// `patience` consecutive epochs without improvement the rate is divided by
/// `factor` (floored at min_lr) and the counter restarts.
class PlateauScheduler {
 public:
  struct Config {
    std::size_t patience = 5;
    double factor = 10.0;
    double threshold = 1e-6;
    double min_lr = 1e-6;
  };

  PlateauScheduler(double initial_lr, Config config);
  explicit PlateauScheduler(double initial_lr) : PlateauScheduler(initial_lr, Config{}) {}

  /// Feeds one epoch loss and returns the learning rate for the next epoch.
  double update(double epoch_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t stale() const { return stale_; }
  const Config& config() const { return config_; }

 private:
  Config config_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

}  // namespace rcodean
