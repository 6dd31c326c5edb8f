#include "rcodean/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace rcodean {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  config_.lr = lr;
}

void Adam::step(const std::vector<ParamRef>& params) {
  for (const ParamRef& p : params) {
    if (p.value == nullptr || p.grad == nullptr) {
      throw std::invalid_argument("Adam: null parameter '" + p.name + "'");
    }
    if (!p.value->same_shape(*p.grad)) {
      throw ShapeError("Adam: gradient " + p.grad->shape_str() + " does not match parameter '" +
                       p.name + "' " + p.value->shape_str());
    }
    if (!all_finite(*p.grad)) throw NonFiniteGradient(p.name);
  }
  if (m_.empty()) {
    for (const ParamRef& p : params) {
      m_.emplace_back(p.value->rows(), p.value->cols());
      v_.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!m_[i].same_shape(*params[i].value)) {
      throw ShapeError("Adam: parameter '" + params[i].name + "' changed shape");
    }
  }

  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->values();
    auto g = params[i].grad->values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / corr1;
      const double v_hat = v[k] / corr2;
      w[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double initial_lr, Config config)
    : config_(config), lr_(initial_lr) {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("scheduler: learning rate must be positive");
  if (config_.patience == 0) throw std::invalid_argument("scheduler: patience must be positive");
  if (!(config_.factor > 1.0)) throw std::invalid_argument("scheduler: factor must exceed 1");
  lr_ = std::max(lr_, config_.min_lr);
}

double PlateauScheduler::update(double epoch_loss) {
  if (!std::isfinite(epoch_loss)) throw std::invalid_argument("scheduler: non-finite epoch loss");
  if (epoch_loss < best_ - config_.threshold) {
    best_ = epoch_loss;
    stale_ = 0;
    return lr_;
  }
  ++stale_;
  if (stale_ >= config_.patience) {
    lr_ = std::max(lr_ / config_.factor, config_.min_lr);
    stale_ = 0;
  }
  return lr_;
}

}  // namespace rcodean
