#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "rcodean/ensemble.hpp"
#include "rcodean/forest.hpp"
#include "rcodean/mlp.hpp"
#include "rcodean/svm.hpp"
#include "test_util.hpp"

using namespace rcodean;
using testutil::random_mat;

namespace {

// Points whose two label functions sit at least `margin` away from zero.
struct Separable {
  Mat x;
  Mat y;
};

Separable separable_codes(std::size_t n, std::size_t dim, std::uint64_t seed, double margin) {
  Rng rng(seed);
  Separable s{Mat(dim, n), Mat(2, n)};
  std::size_t j = 0;
  while (j < n) {
    std::vector<double> v(dim);
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    const double f0 = v[0] + v[1];
    const double f1 = v[2] - v[3];
    if (std::abs(f0) < margin || std::abs(f1) < margin) continue;
    for (std::size_t i = 0; i < dim; ++i) s.x(i, j) = v[i];
    s.y(0, j) = f0 > 0 ? 1.0 : 0.0;
    s.y(1, j) = f1 > 0 ? 1.0 : 0.0;
    ++j;
  }
  return s;
}

double bit_accuracy(const Mat& prob, const Mat& labels, double cut = 0.5) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) hits += ((prob[i] > cut) == (labels[i] > 0.5));
  return static_cast<double>(hits) / static_cast<double>(prob.size());
}

double weighted_gini(double pos, double n) {
  if (n == 0) return 0.0;
  const double p = pos / n;
  return n * 2.0 * p * (1.0 - p);
}

struct OracleSplit {
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

// Every midpoint between distinct values, scored from scratch.
OracleSplit brute_force_split(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> values = x;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  OracleSplit best;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double t = 0.5 * (values[i] + values[i + 1]);
    double nl = 0, pl = 0, nr = 0, pr = 0;
    for (std::size_t s = 0; s < x.size(); ++s) {
      if (x[s] <= t) {
        nl += 1;
        pl += y[s];
      } else {
        nr += 1;
        pr += y[s];
      }
    }
    const double imp = weighted_gini(pl, nl) + weighted_gini(pr, nr);
    if (imp < best.impurity) best = {t, imp};
  }
  return best;
}

// Independent tree walk over the flat node array.
double walk(const DecisionTree& tree, const Mat& f, std::size_t col) {
  std::size_t id = 0;
  for (std::size_t guard = 0; guard < tree.nodes.size(); ++guard) {
    const TreeNode& n = tree.nodes[id];
    if (n.feature < 0) return n.value;
    id = static_cast<std::size_t>(f(n.feature, col) <= n.threshold ? n.left : n.right);
  }
  FAIL("tree walk did not terminate");
  return 0.0;
}

}  // namespace

// ---- MLP head ---------------------------------------------------------------

TEST_CASE("head learns separable two-attribute codes") {
  const Separable s = separable_codes(500, 8, 50, 0.1);
  HeadTrainConfig cfg;
  cfg.epochs = 150;
  cfg.lr = 1e-2;
  cfg.seed = 3;
  const HeadTrainResult r = head_train(s.x, s.y, cfg);
  CHECK(r.warnings.empty());
  CHECK(r.epoch_loss.size() == cfg.epochs);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  const Mat p = head_score(r.head, s.x);
  CHECK(bit_accuracy(p, s.y) >= 0.99);
  for (double v : p.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("head default topology halves then quarters the input") {
  Rng rng(1);
  const MlpHead h = MlpHead::create(32, 3, {}, rng);
  REQUIRE(h.layers.size() == 3);
  CHECK(h.layers[0].out_dim() == 16);
  CHECK(h.layers[1].out_dim() == 8);
  CHECK(h.layers[2].out_dim() == 3);
  CHECK(default_hidden(2) == std::vector<std::size_t>{1, 1});
}

TEST_CASE("all-zero labels push every output below one half") {
  Rng rng(51);
  const Mat x = random_mat(6, 120, rng);
  const Mat y(2, 120);
  HeadTrainConfig cfg;
  cfg.epochs = 20;
  cfg.lr = 1e-2;
  const HeadTrainResult r = head_train(x, y, cfg);
  CHECK(r.warnings.size() == 2);
  const Mat p = head_score(r.head, random_mat(6, 50, rng));
  for (double v : p.values()) CHECK(v < 0.5);
}

TEST_CASE("head training is deterministic for a fixed seed") {
  const Separable s = separable_codes(100, 6, 52, 0.05);
  HeadTrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  HeadTrainResult a = head_train(s.x, s.y, cfg);
  HeadTrainResult b = head_train(s.x, s.y, cfg);
  const auto pa = a.head.parameters();
  const auto pb = b.head.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("zero head scores exactly one half") {
  const MlpHead h = MlpHead::zeros(10, 4);
  Rng rng(53);
  const Mat p = head_score(h, random_mat(10, 7, rng));
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 7);
  for (double v : p.values()) CHECK(v == 0.5);
}

TEST_CASE("head outputs are independent sigmoids, not a softmax") {
  Rng rng(54);
  MlpHead h = MlpHead::create(5, 3, {4, 3}, rng);
  // Push output biases apart so the three probabilities clearly differ.
  Mat& b = h.layers.back().bias;
  b[0] = 3.0;
  b[1] = 2.5;
  b[2] = -1.0;
  const Mat p = head_score(h, random_mat(5, 4, rng, 0.0, 0.1));
  bool any_sum_off = false;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    const double sum = p(0, j) + p(1, j) + p(2, j);
    any_sum_off |= std::abs(sum - 1.0) > 0.1;
  }
  CHECK(any_sum_off);
  // Changing one output unit leaves the others untouched.
  MlpHead h2 = h;
  h2.layers.back().bias[1] = -5.0;
  const Mat x = random_mat(5, 4, rng);
  const Mat q1 = head_score(h, x);
  const Mat q2 = head_score(h2, x);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(q1(0, j) == q2(0, j));
    CHECK(q1(2, j) == q2(2, j));
    CHECK(q1(1, j) != q2(1, j));
  }
}

TEST_CASE("head gradients match central differences of the cross-entropy") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(60 + trial);
    MlpHead h = MlpHead::create(6, 3, {5, 4}, rng);
    for (DenseLayer& l : h.layers)
      for (double& v : l.bias.values()) v = rng.uniform(-0.1, 0.1);
    const Mat x = random_mat(6, 4, rng);
    Mat y(3, 4);
    for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const std::vector<Mat> grads = head_gradients(h, x, y);
    const std::vector<Mat*> params = h.parameters();
    REQUIRE(grads.size() == params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      Mat& w = *params[p];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double orig = w[i];
        const double step = 1e-6;
        w[i] = orig + step;
        const double up = head_loss(h, x, y);
        w[i] = orig - step;
        const double down = head_loss(h, x, y);
        w[i] = orig;
        const double fd = (up - down) / (2 * step);
        CHECK(testutil::close(grads[p][i], fd, 1e-6, 1e-4));
      }
    }
  }
}

TEST_CASE("head rejects mismatched shapes and non-binary labels") {
  const MlpHead h = MlpHead::zeros(4, 2);
  CHECK_THROWS_AS(head_score(h, Mat(5, 3)), ShapeError);
  Mat y(2, 3);
  y(0, 0) = 0.5;
  CHECK_THROWS_AS(head_train(Mat(4, 3), y, HeadTrainConfig{}), std::invalid_argument);
}

// ---- forest -----------------------------------------------------------------

TEST_CASE("step function: a depth-1 tree recovers the Gini-optimal threshold") {
  Rng rng(70);
  const std::size_t n = 200;
  Mat x(1, n), y(1, n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = rng.uniform();
    y[j] = x[j] > 0.5 ? 1.0 : 0.0;
  }
  const ForestConfig cfg{.trees_per_attr = 1, .max_depth = 1, .seed = 4};
  const Forest f = forest_train(x, y, cfg);
  REQUIRE(f.trees.size() == 1);
  REQUIRE(f.trees[0].size() == 1);
  const DecisionTree& tree = f.trees[0][0];
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.depth() == 1);
  const double t = tree.nodes[0].threshold;


  // Oracle on the same bootstrap resample: seeded per attribute, n draws.
  Rng boot(derive_seed(cfg.seed, 0));
  std::vector<double> bx(n), by(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = boot.below(n);
    bx[i] = x[s];
    by[i] = y[s];
  }
  const OracleSplit oracle = brute_force_split(bx, by);
  CHECK(oracle.impurity == 0.0);
  // The cut lands inside the gap between the resample's two classes.
  for (std::size_t i = 0; i < n; ++i) CHECK(((bx[i] > t) == (by[i] > 0.5)));
  CHECK(t > 0.45);
  CHECK(t < 0.55);
  CHECK(t == oracle.threshold);
  CHECK(tree.nodes[tree.nodes[0].left].value == 0.0);
  CHECK(tree.nodes[tree.nodes[0].right].value == 1.0);
}

TEST_CASE("noisy single feature: root split matches the brute-force Gini oracle") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(80 + trial);
    const std::size_t n = 60;
    Mat x(1, n), y(1, n);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = rng.uniform();
      y[j] = rng.bernoulli(0.2 + 0.6 * x[j]) ? 1.0 : 0.0;
    }
    const ForestConfig cfg{.trees_per_attr = 1, .max_depth = 1, .seed = trial};
    const Forest f = forest_train(x, y, cfg);
    Rng boot(derive_seed(cfg.seed, 0));
    std::vector<double> bx(n), by(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = boot.below(n);
      bx[i] = x[s];
      by[i] = y[s];
    }
    const OracleSplit oracle = brute_force_split(bx, by);
    const DecisionTree& tree = f.trees[0][0];
    if (tree.nodes.size() == 1) continue;  // root already pure or no gain
    CHECK(tree.nodes[0].threshold == oracle.threshold);
  }
}

TEST_CASE("pure labels give single-leaf trees") {
  Rng rng(90);
  const Mat x = random_mat(9, 40, rng);
  Mat y(2, 40);
  for (std::size_t j = 0; j < 40; ++j) y(1, j) = 1.0;
  const Forest f = forest_train(x, y, ForestConfig{.trees_per_attr = 5});
  for (std::size_t a = 0; a < 2; ++a) {
    for (const DecisionTree& t : f.trees[a]) {
      REQUIRE(t.nodes.size() == 1);
      CHECK(t.nodes[0].value == static_cast<double>(a));
    }
  }
}

TEST_CASE("forest training is deterministic") {
  Rng rng(91);
  const Mat x = random_mat(16, 80, rng);
  Mat y(3, 80);
  for (double& v : y.values()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  const ForestConfig cfg{.trees_per_attr = 6, .max_depth = 5, .seed = 12};
  const Forest a = forest_train(x, y, cfg);
  const Forest b = forest_train(x, y, cfg);
  CHECK(a.predict_proba(x) == b.predict_proba(x));
  for (std::size_t at = 0; at < 3; ++at)
    for (std::size_t t = 0; t < 6; ++t) {
      const auto& na = a.trees[at][t].nodes;
      const auto& nb = b.trees[at][t].nodes;
      REQUIRE(na.size() == nb.size());
      for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].feature == nb[i].feature);
        CHECK(na[i].threshold == nb[i].threshold);
        CHECK(na[i].value == nb[i].value);
      }
    }
}

TEST_CASE("forest prediction equals the mean of independent tree walks") {
  Rng rng(92);
  const Mat x = random_mat(12, 150, rng);
  Mat y(2, 150);
  for (std::size_t j = 0; j < 150; ++j) {
    y(0, j) = x(0, j) + 0.3 * x(5, j) > 0 ? 1.0 : 0.0;
    y(1, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  const ForestConfig cfg{.trees_per_attr = 7, .max_depth = 4, .seed = 2};
  const Forest f = forest_train(x, y, cfg);
  const Mat probe = random_mat(12, 100, rng, -1.5, 1.5);
  const Mat p = f.predict_proba(probe);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t j = 0; j < 100; ++j) {
      double sum = 0.0;
      for (const DecisionTree& t : f.trees[a]) sum += walk(t, probe, j);
      const double mean = sum / static_cast<double>(f.trees[a].size());
      CHECK(p(a, j) == doctest::Approx(mean).epsilon(1e-15));
      CHECK(((p(a, j) > 0.5) == (mean > 0.5)));
    }
  }
}

TEST_CASE("forest leaves are probabilities and depth is bounded") {
  Rng rng(93);
  const Mat x = random_mat(20, 200, rng);
  Mat y(2, 200);
  for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  for (std::size_t depth : {1u, 3u, 6u}) {
    const Forest f = forest_train(x, y, ForestConfig{.trees_per_attr = 4, .max_depth = depth});
    for (const auto& per_attr : f.trees)
      for (const DecisionTree& t : per_attr) {
        CHECK(t.depth() <= depth);
        for (const TreeNode& n : t.nodes) {
          CHECK(n.value >= 0.0);
          CHECK(n.value <= 1.0);
        }
      }
  }
}

TEST_CASE("forest input errors") {
  CHECK_THROWS_AS(forest_train(Mat(3, 1), Mat(1, 1), ForestConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(forest_train(Mat(3, 4), Mat(1, 5), ForestConfig{}), ShapeError);
  const Forest f = forest_train(Mat(3, 4), Mat(1, 4), ForestConfig{.trees_per_attr = 1});
  CHECK_THROWS_AS(f.predict_proba(Mat(2, 1)), ShapeError);
}

// ---- SVM --------------------------------------------------------------------

namespace {

// Two unit discs centred at (-1.5, 0) and (1.5, 0): a gap of 1.0 between them.
void blobs(std::size_t n, Rng& rng, Mat& x, Mat& y) {
  x = Mat(2, n);
  y = Mat(1, n);
  for (std::size_t j = 0; j < n; ++j) {
    const bool pos = rng.bernoulli(0.5);
    double a, b;
    do {
      a = rng.uniform(-1.0, 1.0);
      b = rng.uniform(-1.0, 1.0);
    } while (a * a + b * b > 1.0);
    x(0, j) = a + (pos ? 1.5 : -1.5);
    x(1, j) = b;
    y[j] = pos ? 1.0 : 0.0;
  }
}

double svm_accuracy(const LinearSvm& svm, const Mat& x, const Mat& y) {
  const Mat m = svm.margins(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m.size(); ++i) hits += ((m[i] > 0) == (y[i] > 0.5));
  return static_cast<double>(hits) / static_cast<double>(m.size());
}

}  // namespace

TEST_CASE("svm separates 2-D blobs on held-out points") {
  Rng rng(100);
  Mat xtr, ytr, xte, yte;
  blobs(300, rng, xtr, ytr);
  blobs(200, rng, xte, yte);
  const LinearSvm svm = svm_train(xtr, ytr, SvmConfig{.epochs = 20, .reg = 1e-3, .seed = 1});
  CHECK(svm.num_attributes() == 1);
  CHECK(svm.num_features() == 2);
  CHECK(svm_accuracy(svm, xte, yte) >= 0.99);
}

TEST_CASE("svm with only positive labels predicts positive on training points") {
  Rng rng(101);
  const Mat x = random_mat(5, 50, rng);
  const Mat y(1, 50, 1.0);
  const LinearSvm svm = svm_train(x, y, SvmConfig{});
  const Mat m = svm.margins(x);
  for (double v : m.values()) CHECK(v > 0.0);
}

TEST_CASE("scaling features by 10 keeps training-set signs") {
  Rng rng(102);
  Mat x, y;
  blobs(200, rng, x, y);
  const SvmConfig cfg{.epochs = 30, .reg = 1e-5, .seed = 5};
  const LinearSvm a = svm_train(x, y, cfg);
  const LinearSvm b = svm_train(x * 10.0, y, cfg);
  const Mat ma = a.margins(x);
  const Mat mb = b.margins(x * 10.0);
  for (std::size_t i = 0; i < ma.size(); ++i) CHECK(((ma[i] > 0) == (mb[i] > 0)));
}

TEST_CASE("svm is deterministic and handles several attributes") {
  Rng rng(103);
  const Mat x = random_mat(4, 60, rng);
  Mat y(3, 60);
  for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  const LinearSvm a = svm_train(x, y, SvmConfig{.seed = 8});
  const LinearSvm b = svm_train(x, y, SvmConfig{.seed = 8});
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  CHECK(a.margins(x).rows() == 3);
  CHECK_THROWS_AS(a.margins(Mat(5, 2)), ShapeError);
}

// ---- vote -------------------------------------------------------------------

TEST_CASE("vote examples") {
  CHECK(ensemble_vote({1}, {1}, {0}) == Bits{1});
  CHECK(ensemble_vote({1}, {0}, {0}) == Bits{0});
  CHECK(ensemble_vote({0}, {0}, {0}) == Bits{0});
  CHECK(ensemble_vote({1}, {1}, {1}) == Bits{1});
  CHECK(ensemble_vote({1, 0, 1}, {1, 0, 0}, {0, 1, 0}) == Bits{1, 0, 0});
  CHECK_THROWS_AS(ensemble_vote({1}, {1, 0}, {0}), std::invalid_argument);
}

TEST_CASE("vote is idempotent and permutation-invariant over all 3-bit inputs") {
  const std::size_t k = 3;
  const std::size_t combos = 1u << k;
  auto bits_of = [k](std::size_t v) {
    Bits b(k);
    for (std::size_t i = 0; i < k; ++i) b[i] = (v >> i) & 1u;
    return b;
  };
  for (std::size_t a = 0; a < combos; ++a) {
    const Bits p = bits_of(a);
    CHECK(ensemble_vote(p, p, p) == p);
    for (std::size_t b = 0; b < combos; ++b)
      for (std::size_t c = 0; c < combos; ++c) {
        const Bits q = bits_of(b), r = bits_of(c);
        const Bits v = ensemble_vote(p, q, r);
        CHECK(ensemble_vote(p, r, q) == v);
        CHECK(ensemble_vote(q, p, r) == v);
        CHECK(ensemble_vote(q, r, p) == v);
        CHECK(ensemble_vote(r, p, q) == v);
        CHECK(ensemble_vote(r, q, p) == v);
        for (std::size_t i = 0; i < k; ++i) CHECK(v[i] == (p[i] + q[i] + r[i] >= 2 ? 1 : 0));
      }
  }
}

TEST_CASE("threshold is strict at one half") {
  const std::array<double, 4> p{0.5, 0.5000001, 0.0, 1.0};
  CHECK(threshold_bits(p) == Bits{0, 1, 0, 1});
}
