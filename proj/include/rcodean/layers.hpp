#pragma once

#include <string>

#include "rcodean/mat.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

/// Fully connected layer y = phi(W x + b [+ skip]).
struct DenseLayer {
  std::string name;
  Mat weight;  // out_dim x in_dim
  Mat bias;    // out_dim x 1
  Activation act = Activation::relu;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static DenseLayer glorot(std::string name, std::size_t in_dim, std::size_t out_dim,
                           Activation act, Rng& rng);
  static DenseLayer zeros(std::string name, std::size_t in_dim, std::size_t out_dim,
                          Activation act);

  /// Throws ShapeError if weight and bias disagree.
  void validate() const;
};

struct LayerCache {
  Mat input;
  Mat pre_activation;
  Mat output;
};

struct DenseGrads {
  Mat grad_in;
  Mat grad_weight;
  Mat grad_bias;
  /// Gradient w.r.t. an additive pre-activation skip input; equals delta.
  Mat grad_skip;
};

/// Columns of x are samples. The skip, when given, is added before phi.
LayerCache dense_forward(const DenseLayer& layer, const Mat& x);
LayerCache dense_forward(const DenseLayer& layer, const Mat& x, const Mat& skip_in);

DenseGrads dense_backward(const DenseLayer& layer, const LayerCache& cache, const Mat& grad_out);
/// Same as dense_backward but starting from dL/dz instead of dL/dy.
DenseGrads dense_backward_delta(const DenseLayer& layer, const LayerCache& cache, Mat delta);

}  // namespace rcodean
