#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "rcodean/layers.hpp"
#include "test_util.hpp"

using namespace rcodean;
using testutil::random_mat;

namespace {

DenseLayer random_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l = DenseLayer::glorot("test", in, out, act, rng);
  for (double& b : l.bias.values()) b = rng.uniform(-0.5, 0.5);
  return l;
}

bool near_kink(const LayerCache& c) {
  for (double z : c.pre_activation.values())
    if (std::abs(z) < 1e-3) return true;
  return false;
}

// Central difference of f with respect to every entry of m.
Mat numeric_grad(Mat& m, const std::function<double()>& f, double h = 1e-6) {
  Mat g(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double saved = m[i];
    m[i] = saved + h;
    const double up = f();
    m[i] = saved - h;
    const double down = f();
    m[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

void check_close(const Mat& analytic, const Mat& numeric) {
  REQUIRE(analytic.same_shape(numeric));
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CHECK(testutil::close(analytic[i], numeric[i], 1e-6, 1e-4));
  }
}

}  // namespace

TEST_CASE("zero weights with a skip pass the skip through relu") {
  const DenseLayer l = DenseLayer::zeros("blk", 3, 4, Activation::relu);
  const Mat x = Mat::column({0.3, -2.0, 7.0});
  const Mat s = Mat::column({0.0, 0.5, 1.5, 9.0});
  CHECK(dense_forward(l, x, s).output == s);
}

TEST_CASE("identity weights and relu") {
  DenseLayer l = DenseLayer::zeros("eye", 2, 2, Activation::relu);
  l.weight = Mat::identity(2);
  CHECK(dense_forward(l, Mat::column({1, -1})).output == Mat::column({1, 0}));
}

TEST_CASE("forward matches recomputation") {
  Rng rng(10);
  for (Activation act : {Activation::relu, Activation::sigmoid, Activation::tanh, Activation::identity}) {
    const DenseLayer l = random_layer(5, 4, act, rng);
    const Mat x = random_mat(5, 3, rng);
    const Mat s = random_mat(4, 3, rng);
    const LayerCache c = dense_forward(l, x, s);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t o = 0; o < 4; ++o) {
        double z = l.bias[o] + s(o, j);
        for (std::size_t i = 0; i < 5; ++i) z += l.weight(o, i) * x(i, j);
        double y = z;
        if (act == Activation::relu) y = z > 0 ? z : 0.0;
        if (act == Activation::sigmoid) y = 1.0 / (1.0 + std::exp(-z));
        if (act == Activation::tanh) y = std::tanh(z);
        CHECK(c.pre_activation(o, j) == doctest::Approx(z).epsilon(1e-14));
        CHECK(c.output(o, j) == doctest::Approx(y).epsilon(1e-14));
      }
    CHECK(c.output == activation(c.pre_activation, act));
  }
}

TEST_CASE("shape errors name the layer") {
  const DenseLayer l = DenseLayer::zeros("enc2", 3, 2, Activation::relu);
  try {
    (void)dense_forward(l, Mat(4, 1));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("enc2") != std::string::npos);
  }
  CHECK_THROWS_AS(dense_forward(l, Mat(3, 1), Mat(3, 1)), ShapeError);
  const LayerCache c = dense_forward(l, Mat(3, 2));
  CHECK_THROWS_AS(dense_backward(l, c, Mat(3, 2)), ShapeError);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  Rng rng(11);
  const DenseLayer l = random_layer(4, 3, Activation::sigmoid, rng);
  const LayerCache c = dense_forward(l, random_mat(4, 2, rng), random_mat(3, 2, rng));
  const DenseGrads g = dense_backward(l, c, Mat(3, 2));
  CHECK(g.grad_in == Mat(4, 2));
  CHECK(g.grad_weight == Mat(3, 4));
  CHECK(g.grad_bias == Mat(3, 1));
  CHECK(g.grad_skip == Mat(3, 2));
}

TEST_CASE("1x1 sigmoid hand values") {
  DenseLayer l = DenseLayer::zeros("one", 1, 1, Activation::sigmoid);
  l.weight[0] = 1.0;
  const LayerCache c = dense_forward(l, Mat::column({0.0}));
  const DenseGrads g = dense_backward(l, c, Mat::column({1.0}));
  CHECK(g.grad_weight[0] == 0.0);
  CHECK(g.grad_bias[0] == 0.25);
  CHECK(g.grad_in[0] == 0.25);
}

TEST_CASE("gradients match finite differences at random points") {
  Rng rng(12);
  int tested = 0;
  for (int t = 0; t < 100; ++t) {
    const Activation act = std::array{Activation::relu, Activation::sigmoid, Activation::tanh}[t % 3];
    DenseLayer l = random_layer(4, 3, act, rng);
    Mat x = random_mat(4, 2, rng);
    Mat skip = random_mat(3, 2, rng);
    const Mat coeff = random_mat(3, 2, rng);  // L = sum(coeff .* y), a smooth scalar of the output
    const LayerCache c = dense_forward(l, x, skip);
    if (act == Activation::relu && near_kink(c)) continue;
    ++tested;
    auto loss = [&] { return dot(coeff, dense_forward(l, x, skip).output); };
    const DenseGrads g = dense_backward(l, c, coeff);
    check_close(g.grad_weight, numeric_grad(l.weight, loss));
    check_close(g.grad_bias, numeric_grad(l.bias, loss));
    check_close(g.grad_in, numeric_grad(x, loss));
    check_close(g.grad_skip, numeric_grad(skip, loss));
    // Structural identity: both equal delta, summed over samples for the bias.
    CHECK(g.grad_bias == g.grad_skip.row_sums());
  }
  CHECK(tested >= 80);
}

TEST_CASE("sum-of-outputs loss") {
  Rng rng(13);
  DenseLayer l = random_layer(5, 4, Activation::tanh, rng);
  Mat x = random_mat(5, 1, rng);
  auto loss = [&] { return dense_forward(l, x).output.sum(); };
  const DenseGrads g = dense_backward(l, dense_forward(l, x), Mat(4, 1, 1.0));
  check_close(g.grad_weight, numeric_grad(l.weight, loss));
  check_close(g.grad_bias, numeric_grad(l.bias, loss));
  check_close(g.grad_in, numeric_grad(x, loss));
  CHECK(g.grad_skip == g.grad_bias);
}

TEST_CASE("glorot init range and zero bias") {
  Rng rng(14);
  const DenseLayer l = DenseLayer::glorot("g", 30, 20, Activation::relu, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  CHECK(testutil::max_abs(l.weight) <= limit);
  CHECK(testutil::max_abs(l.weight) > 0.5 * limit);
  CHECK(l.bias == Mat(20, 1));
  CHECK(l.in_dim() == 30);
  CHECK(l.out_dim() == 20);
}
