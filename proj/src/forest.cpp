#include "rcodean/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rcodean/mlp.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

namespace {

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

class TreeBuilder {
 public:
  TreeBuilder(const Mat& features, const Mat& labels, std::size_t attr, std::size_t max_depth,
              Rng& rng)
      : features_(features), labels_(labels), attr_(attr), max_depth_(max_depth), rng_(rng) {
    const std::size_t f = features.rows();
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(f))));
    all_features_.resize(f);
    std::iota(all_features_.begin(), all_features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double pos = 0.0;
    for (std::size_t s : samples) pos += labels_(attr_, s);
    const double n = static_cast<double>(samples.size());
    tree_.nodes[id].value = n > 0.0 ? pos / n : 0.0;
    if (depth >= max_depth_ || samples.size() < 2 || pos == 0.0 || pos == n) return id;

    const Split split = best_split(samples, pos);
    if (split.feature < 0 || split.impurity >= gini(pos, n) * n - 1e-12) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
      (features_(split.feature, s) <= split.threshold ? left : right).push_back(s);
    }
    if (left.empty() || right.empty()) return id;
    samples.clear();
    samples.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& samples, double total_pos) {
    // Partial Fisher-Yates: the first mtry_ entries are the candidates.
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng_.below(all_features_.size() - i);
      std::swap(all_features_[i], all_features_[j]);
    }
    const double n = static_cast<double>(samples.size());
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> column(samples.size());
    for (std::size_t c = 0; c < mtry_; ++c) {
      const std::size_t f = all_features_[c];
      for (std::size_t i = 0; i < samples.size(); ++i) {
        column[i] = {features_(f, samples[i]), labels_(attr_, samples[i])};
      }
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double impurity = nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    return best;
  }

  const Mat& features_;
  const Mat& labels_;
  std::size_t attr_;
  std::size_t max_depth_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> all_features_;
  DecisionTree tree_;
};

}  // namespace

double DecisionTree::predict(const Mat& features, std::size_t col) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& node = nodes[id];
    id = features(static_cast<std::size_t>(node.feature), col) <= node.threshold ? node.left
                                                                                 : node.right;
  }
  return nodes[id].value;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[id].is_leaf()) {
      stack.emplace_back(nodes[id].left, d + 1);
      stack.emplace_back(nodes[id].right, d + 1);
    }
  }
  return deepest;
}

Mat Forest::predict_proba(const Mat& features) const {
  if (features.rows() != num_features) {
    throw ShapeError("forest: features " + features.shape_str() + " but forest expects " +
                     std::to_string(num_features) + " rows");
  }
  Mat out(trees.size(), features.cols());
  for (std::size_t a = 0; a < trees.size(); ++a) {
    for (std::size_t j = 0; j < features.cols(); ++j) {
      double sum = 0.0;
      for (const DecisionTree& t : trees[a]) sum += t.predict(features, j);
      out(a, j) = trees[a].empty() ? 0.0 : sum / static_cast<double>(trees[a].size());
    }
  }
  return out;
}

Forest forest_train(const Mat& features, const Mat& labels, const ForestConfig& config) {
  if (features.cols() < 2) throw std::invalid_argument("forest_train: need at least 2 samples");
  if (labels.cols() != features.cols()) {
    throw ShapeError("forest_train: features " + features.shape_str() + " vs labels " +
                     labels.shape_str());
  }
  check_binary_labels(labels, "forest_train");
  if (config.trees_per_attr == 0) throw std::invalid_argument("forest_train: need at least 1 tree");

  const std::size_t n = features.cols();
  Forest forest;
  forest.num_features = features.rows();
  forest.trees.resize(labels.rows());
  for (std::size_t a = 0; a < labels.rows(); ++a) {
    Rng rng(derive_seed(config.seed, a));
    TreeBuilder builder(features, labels, a, config.max_depth, rng);
    for (std::size_t t = 0; t < config.trees_per_attr; ++t) {
      std::vector<std::size_t> bootstrap(n);
      for (std::size_t& s : bootstrap) s = rng.below(n);
      forest.trees[a].push_back(builder.build(std::move(bootstrap)));
    }
  }
  return forest;
}

}  // namespace rcodean
