#include "rcodean/layers.hpp"

#include <cmath>

namespace rcodean {

namespace {

[[noreturn]] void layer_error(const DenseLayer& layer, const std::string& what) {
  throw ShapeError("layer '" + layer.name + "': " + what);
}

LayerCache forward_impl(const DenseLayer& layer, const Mat& x, const Mat* skip_in) {
  if (x.rows() != layer.in_dim()) {
    layer_error(layer, "input " + x.shape_str() + " does not match in_dim " +
                           std::to_string(layer.in_dim()));
  }
  LayerCache cache;
  cache.input = x;
  cache.pre_activation = matmul(layer.weight, x);
  Mat& z = cache.pre_activation;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double b = layer.bias[r];
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += b;
  }
  if (skip_in != nullptr) {
    if (!skip_in->same_shape(z)) {
      layer_error(layer, "skip input " + skip_in->shape_str() + " does not match pre-activation " +
                             z.shape_str());
    }
    z += *skip_in;
  }
  cache.output = activation(z, layer.act, ActMode::value);
  return cache;
}

}  // namespace

DenseLayer DenseLayer::glorot(std::string name, std::size_t in_dim, std::size_t out_dim,
                              Activation act, Rng& rng) {
  DenseLayer layer = zeros(std::move(name), in_dim, out_dim, act);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
  return layer;
}

DenseLayer DenseLayer::zeros(std::string name, std::size_t in_dim, std::size_t out_dim,
                             Activation act) {
  return DenseLayer{std::move(name), Mat(out_dim, in_dim), Mat(out_dim, 1), act};
}

void DenseLayer::validate() const {
  if (weight.empty()) layer_error(*this, "empty weight matrix");
  if (bias.rows() != weight.rows() || bias.cols() != 1) {
    layer_error(*this, "bias " + bias.shape_str() + " does not match weight " + weight.shape_str());
  }
}

LayerCache dense_forward(const DenseLayer& layer, const Mat& x) {
  return forward_impl(layer, x, nullptr);
}

LayerCache dense_forward(const DenseLayer& layer, const Mat& x, const Mat& skip_in) {
  return forward_impl(layer, x, &skip_in);
}

DenseGrads dense_backward(const DenseLayer& layer, const LayerCache& cache, const Mat& grad_out) {
  if (!grad_out.same_shape(cache.output)) {
    layer_error(layer, "upstream gradient " + grad_out.shape_str() + " does not match output " +
                           cache.output.shape_str());
  }
  Mat delta = activation(cache.pre_activation, layer.act, ActMode::derivative);
  auto d = delta.values();
  auto g = grad_out.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= g[i];
  return dense_backward_delta(layer, cache, std::move(delta));
}

DenseGrads dense_backward_delta(const DenseLayer& layer, const LayerCache& cache, Mat delta) {
  if (!delta.same_shape(cache.pre_activation) || cache.input.rows() != layer.in_dim()) {
    layer_error(layer, "stale cache or delta " + delta.shape_str() + " vs pre-activation " +
                           cache.pre_activation.shape_str());
  }
  DenseGrads grads;
  grads.grad_weight = matmul_nt(delta, cache.input);
  grads.grad_bias = delta.row_sums();
  grads.grad_in = matmul_tn(layer.weight, delta);
  grads.grad_skip = std::move(delta);
  return grads;
}

}  // namespace rcodean
