#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcodean/layers.hpp"
#include "rcodean/mat.hpp"

namespace rcodean {

/// Multi-label classifier: relu hidden layers followed by a sigmoid output
/// unit per attribute. Outputs are independent probabilities (not softmax).
struct MlpHead {
  std::vector<DenseLayer> layers;

  /// Hidden sizes default to {in/2, in/4} when `hidden` is empty.
  static MlpHead create(std::size_t input_dim, std::size_t outputs,
                        std::vector<std::size_t> hidden, Rng& rng);
  /// All-zero parameters; scores 0.5 everywhere.
  static MlpHead zeros(std::size_t input_dim, std::size_t outputs,
                       std::vector<std::size_t> hidden = {});

  bool empty() const { return layers.empty(); }
  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }

  std::vector<Mat*> parameters();
  std::vector<std::string> parameter_names() const;
};

/// Default hidden sizes {in/2, in/4}, each at least 1.
std::vector<std::size_t> default_hidden(std::size_t input_dim);

/// Sigmoid outputs (outputs x N) for features (input_dim x N).
Mat head_score(const MlpHead& head, const Mat& features);

/// Mean over samples of the binary cross-entropy summed over attributes.
double head_loss(const MlpHead& head, const Mat& features, const Mat& labels);

/// Gradient of head_loss, in MlpHead::parameters() order.
std::vector<Mat> head_gradients(const MlpHead& head, const Mat& features, const Mat& labels);

struct HeadTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden;  // empty: default_hidden
};

struct HeadTrainResult {
  MlpHead head;
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

/// Trains with Adam on minibatches in a seeded shuffle order. Labels are an
/// outputs x N matrix of 0/1. A label row with a single class is trained
/// anyway and reported in `warnings`.
HeadTrainResult head_train(const Mat& features, const Mat& labels, const HeadTrainConfig& config);

/// Throws std::invalid_argument unless every entry is exactly 0 or 1.
void check_binary_labels(const Mat& labels, const char* who);

}  // namespace rcodean
