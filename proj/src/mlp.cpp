#include "rcodean/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "rcodean/optimizer.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

namespace {

std::vector<LayerCache> forward_all(const MlpHead& head, const Mat& x) {
  std::vector<LayerCache> caches;
  caches.reserve(head.layers.size());
  for (std::size_t i = 0; i < head.layers.size(); ++i) {
    caches.push_back(dense_forward(head.layers[i], i == 0 ? x : caches.back().output));
  }
  return caches;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_head(const MlpHead& head, const Mat& x) {
  if (head.empty()) throw std::invalid_argument("MlpHead has no layers");
  if (x.rows() != head.input_dim()) {
    throw ShapeError("head: features " + x.shape_str() + " but head expects " +
                     std::to_string(head.input_dim()) + " rows");
  }
}

std::vector<std::string> layer_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i + 1 < count; ++i) names.push_back("hidden" + std::to_string(i + 1));
  names.push_back("output");
  return names;
}

}  // namespace

std::vector<std::size_t> default_hidden(std::size_t input_dim) {
  return {std::max<std::size_t>(1, input_dim / 2), std::max<std::size_t>(1, input_dim / 4)};
}

MlpHead MlpHead::create(std::size_t input_dim, std::size_t outputs,
                        std::vector<std::size_t> hidden, Rng& rng) {
  if (hidden.empty()) hidden = default_hidden(input_dim);
  const auto names = layer_names(hidden.size() + 1);
  MlpHead head;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    head.layers.push_back(DenseLayer::glorot(names[i], in, hidden[i], Activation::relu, rng));
    in = hidden[i];
  }
  head.layers.push_back(DenseLayer::glorot(names.back(), in, outputs, Activation::sigmoid, rng));
  return head;
}

MlpHead MlpHead::zeros(std::size_t input_dim, std::size_t outputs, std::vector<std::size_t> hidden) {
  if (hidden.empty()) hidden = default_hidden(input_dim);
  const auto names = layer_names(hidden.size() + 1);
  MlpHead head;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    head.layers.push_back(DenseLayer::zeros(names[i], in, hidden[i], Activation::relu));
    in = hidden[i];
  }
  head.layers.push_back(DenseLayer::zeros(names.back(), in, outputs, Activation::sigmoid));
  return head;
}

std::vector<Mat*> MlpHead::parameters() {
  std::vector<Mat*> out;
  for (DenseLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<std::string> MlpHead::parameter_names() const {
  std::vector<std::string> out;
  for (const DenseLayer& l : layers) {
    out.push_back(l.name + ".weight");
    out.push_back(l.name + ".bias");
  }
  return out;
}

void check_binary_labels(const Mat& labels, const char* who) {
  for (double v : labels.values()) {
    if (v != 0.0 && v != 1.0) {
      throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1");
    }
  }
}

Mat head_score(const MlpHead& head, const Mat& features) {
  check_head(head, features);
  Mat x = features;
  for (const DenseLayer& layer : head.layers) x = dense_forward(layer, x).output;
  return x;
}

double head_loss(const MlpHead& head, const Mat& features, const Mat& labels) {
  check_head(head, features);
  const auto caches = forward_all(head, features);
  const Mat& z = caches.back().pre_activation;
  if (!labels.same_shape(z)) {
    throw ShapeError("head_loss: labels " + labels.shape_str() + " vs outputs " + z.shape_str());
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) loss += softplus(z[i]) - labels[i] * z[i];
  return loss / static_cast<double>(features.cols());
}

std::vector<Mat> head_gradients(const MlpHead& head, const Mat& features, const Mat& labels) {
  check_head(head, features);
  const auto caches = forward_all(head, features);
  const Mat& p = caches.back().output;
  if (!labels.same_shape(p)) {
    throw ShapeError("head_gradients: labels " + labels.shape_str() + " vs outputs " +
                     p.shape_str());
  }
  const double inv_n = 1.0 / static_cast<double>(features.cols());
  Mat delta = p;
  delta -= labels;
  delta *= inv_n;

  std::vector<Mat> grads(2 * head.layers.size());
  for (std::size_t i = head.layers.size(); i-- > 0;) {
    DenseGrads g = i + 1 == head.layers.size()
                       ? dense_backward_delta(head.layers[i], caches[i], std::move(delta))
                       : dense_backward(head.layers[i], caches[i], delta);
    grads[2 * i] = std::move(g.grad_weight);
    grads[2 * i + 1] = std::move(g.grad_bias);
    delta = std::move(g.grad_in);
  }
  return grads;
}

HeadTrainResult head_train(const Mat& features, const Mat& labels, const HeadTrainConfig& config) {
  if (features.cols() == 0) throw std::invalid_argument("head_train: no samples");
  if (labels.cols() != features.cols()) {
    throw ShapeError("head_train: " + std::to_string(features.cols()) + " feature columns but " +
                     std::to_string(labels.cols()) + " label columns");
  }
  check_binary_labels(labels, "head_train");
  if (config.batch_size == 0) throw std::invalid_argument("head_train: batch size must be positive");

  HeadTrainResult result;
  for (std::size_t a = 0; a < labels.rows(); ++a) {
    double pos = 0.0;
    for (std::size_t j = 0; j < labels.cols(); ++j) pos += labels(a, j);
    if (pos == 0.0 || pos == static_cast<double>(labels.cols())) {
      result.warnings.push_back("attribute " + std::to_string(a) + " has a single class (" +
                                (pos == 0.0 ? "all 0" : "all 1") + ")");
      spdlog::warn("head_train: {}", result.warnings.back());
    }
  }

  Rng rng(config.seed);
  result.head = MlpHead::create(features.rows(), labels.rows(), config.hidden, rng);
  Adam adam(AdamConfig{.lr = config.lr});
  const auto names = result.head.parameter_names();

  std::vector<std::size_t> order(features.cols());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Mat xb = features.gather_cols(idx);
      const Mat yb = labels.gather_cols(idx);
      epoch_loss += head_loss(result.head, xb, yb) * static_cast<double>(idx.size());
      const std::vector<Mat> grads = head_gradients(result.head, xb, yb);
      auto params = result.head.parameters();
      std::vector<ParamRef> refs;
      for (std::size_t i = 0; i < params.size(); ++i) refs.push_back({names[i], params[i], &grads[i]});
      adam.step(refs);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace rcodean
