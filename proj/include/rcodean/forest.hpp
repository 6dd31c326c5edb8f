#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcodean/mat.hpp"

namespace rcodean {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;     // taken when x[feature] <= threshold
  int right = -1;
  double value = 0.0;  // positive-class fraction at this node

  bool is_leaf() const { return feature < 0; }
};

/// Binary classification tree stored as a flat node array; node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  /// Leaf probability for the sample in column `col` of `features`.
  double predict(const Mat& features, std::size_t col) const;
  std::size_t depth() const;
};

/// One bagged ensemble of trees per attribute.
struct Forest {
  std::size_t num_features = 0;
  std::vector<std::vector<DecisionTree>> trees;  // [attribute][tree]

  std::size_t num_attributes() const { return trees.size(); }
  bool empty() const { return trees.empty(); }

  /// Mean leaf probability over the trees, attributes x N.
  Mat predict_proba(const Mat& features) const;
};

struct ForestConfig {
  std::size_t trees_per_attr = 32;
  std::size_t max_depth = 8;
  std::uint64_t seed = 0;
};

/// Grows, per attribute, `trees_per_attr` trees on bootstrap resamples.
/// Each split considers floor(sqrt(F)) random features and picks the
/// threshold with the largest Gini impurity decrease; thresholds are
/// midpoints between consecutive distinct values. Features are F x N,
/// labels attributes x N with 0/1 entries.
Forest forest_train(const Mat& features, const Mat& labels, const ForestConfig& config);

}  // namespace rcodean
