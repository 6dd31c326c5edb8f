#include "rcodean/svm.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rcodean/mlp.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

Mat LinearSvm::margins(const Mat& features) const {
  if (features.rows() != num_features()) {
    throw ShapeError("svm: features " + features.shape_str() + " but svm expects " +
                     std::to_string(num_features()) + " rows");
  }
  Mat out = matmul(weights, features);
  for (std::size_t a = 0; a < out.rows(); ++a)
    for (std::size_t j = 0; j < out.cols(); ++j) out(a, j) += bias[a];
  return out;
}

LinearSvm svm_train(const Mat& features, const Mat& labels, const SvmConfig& config) {
  if (features.cols() == 0) throw std::invalid_argument("svm_train: no samples");
  if (labels.cols() != features.cols()) {
    throw ShapeError("svm_train: features " + features.shape_str() + " vs labels " +
                     labels.shape_str());
  }
  if (!(config.reg > 0.0)) throw std::invalid_argument("svm_train: reg must be positive");
  check_binary_labels(labels, "svm_train");

  const std::size_t dims = features.rows();
  const std::size_t n = features.cols();
  LinearSvm svm{Mat(labels.rows(), dims), Mat(labels.rows(), 1)};
  const double radius = 1.0 / std::sqrt(config.reg);

  for (std::size_t a = 0; a < labels.rows(); ++a) {
    Rng rng(derive_seed(config.seed, a));
    std::vector<double> w(dims + 1, 0.0);  // last entry is the bias weight
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (config.reg * static_cast<double>(t));
        const double y = labels(a, i) > 0.5 ? 1.0 : -1.0;
        double margin = w[dims];
        for (std::size_t f = 0; f < dims; ++f) margin += w[f] * features(f, i);
        const double shrink = 1.0 - eta * config.reg;
        for (double& v : w) v *= shrink;
        if (y * margin < 1.0) {
          for (std::size_t f = 0; f < dims; ++f) w[f] += eta * y * features(f, i);
          w[dims] += eta * y;
        }
        double norm2 = 0.0;
        for (double v : w) norm2 += v * v;
        if (norm2 > radius * radius) {
          const double scale = radius / std::sqrt(norm2);
          for (double& v : w) v *= scale;
        }
      }
    }
    for (std::size_t f = 0; f < dims; ++f) svm.weights(a, f) = w[f];
    svm.bias[a] = w[dims];
  }
  return svm;
}

}  // namespace rcodean
