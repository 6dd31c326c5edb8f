#include "rcodean/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rcodean/errors.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

namespace {

double loss_of(const RCodeanNet& net, const Mat& x) {
  return codean_loss(net, x, net_forward(net, x).reconstruction).total;
}

}  // namespace

double GradcheckReport::worst_rel() const {
  double w = 0.0;
  for (const GradcheckGroup& g : groups) w = std::max(w, g.worst_rel);
  return w;
}

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  if (config.trials == 0) throw UsageError("gradcheck needs at least one trial");
  if (config.step <= 0.0) throw UsageError("gradcheck step must be positive");
  GradcheckReport report;
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    Rng rng(derive_seed(config.seed, trial));
    RCodeanNet net = RCodeanNet::create(config.input_dim, config.hidden_dim, config.params,
                                        default_skips(), rng);
    // Random biases so no unit sits exactly at a relu kink.
    for (DenseLayer& l : net.layers)
      for (double& b : l.bias.values()) b = rng.uniform(-0.1, 0.1);
    Mat x(config.input_dim, config.batch);
    for (double& v : x.values()) v = rng.uniform(0.0, 1.0);

    const NetGrads grads = net_backward(net, x, net_forward(net, x), config.backward);
    const std::vector<Mat*> params = net.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const std::string& name = grads.names[p];
      auto group = std::find_if(report.groups.begin(), report.groups.end(),
                                [&](const GradcheckGroup& g) { return g.name == name; });
      if (group == report.groups.end()) {
        report.groups.push_back({name});
        group = report.groups.end() - 1;
      }
      Mat& value = *params[p];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double saved = value[i];
        value[i] = saved + config.step;
        const double up = loss_of(net, x);
        value[i] = saved - config.step;
        const double down = loss_of(net, x);
        value[i] = saved;
        const double numeric = (up - down) / (2.0 * config.step);
        const double analytic = grads.values[p][i];
        const double err = std::abs(analytic - numeric);
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        // Equivalent to the pass rule: rel <= rel_tol exactly when the entry passes.
        const double rel = err / std::max(scale, config.abs_tol / config.rel_tol);
        group->worst_abs = std::max(group->worst_abs, err);
        group->worst_rel = std::max(group->worst_rel, rel);
        ++report.checked;
        if (rel > config.rel_tol) {
          group->passed = false;
          if (report.passed) {
            const std::size_t r = i / value.cols();
            const std::size_t c = i % value.cols();
            report.first_failure = "trial " + std::to_string(trial) + " " + name + "[" +
                                   std::to_string(r) + "," + std::to_string(c) + "]";
          }
          report.passed = false;
        }
      }
    }
  }
  return report;
}

}  // namespace rcodean
