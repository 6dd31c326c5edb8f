#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "rcodean/optimizer.hpp"
#include "test_util.hpp"

using namespace rcodean;
using testutil::random_mat;

TEST_CASE("zero gradients leave parameters unchanged") {
  Rng rng(40);
  Mat w = random_mat(3, 4, rng);
  const Mat before = w;
  const Mat g(3, 4);
  Adam adam;
  for (int i = 0; i < 10; ++i) adam.step({{"w", &w, &g}});
  CHECK(w == before);
  CHECK(adam.steps() == 10);
}

TEST_CASE("first step moves by lr / (1 + eps)") {
  Mat w(1, 1, 0.0);
  const Mat g(1, 1, 1.0);
  Adam adam;
  adam.step({{"w", &w, &g}});
  CHECK(w[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam matches a scalar reference over several steps") {
  Mat w(1, 1, 0.3);
  Mat g(1, 1);
  Adam adam(AdamConfig{.lr = 0.01});
  double ref = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 20; ++t) {
    const double grad = std::sin(t) + 0.5;
    g[0] = grad;
    adam.step({{"w", &w, &g}});
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("quadratic bowl converges") {
  Rng rng(41);
  Mat w = random_mat(10, 1, rng, -1.0, 1.0);
  Mat g(10, 1);
  Adam adam(AdamConfig{.lr = 0.01});
  double loss = 0.0;
  for (int step = 0; step < 500; ++step) {
    for (std::size_t i = 0; i < 10; ++i) g[i] = 2.0 * w[i];
    adam.step({{"w", &w, &g}});
    loss = norms(w).dot_self;
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("flipping gradient signs flips the updates") {
  // Starting at zero keeps the comparison exact: IEEE rounding commutes with
  // negation, so a == -b must hold bit for bit after every step.
  Rng rng(42);
  Mat a(4, 3), b(4, 3);
  Adam adam_a, adam_b;
  for (int t = 0; t < 15; ++t) {
    const Mat g = random_mat(4, 3, rng);
    const Mat neg = g * -1.0;
    adam_a.step({{"w", &a, &g}});
    adam_b.step({{"w", &b, &neg}});
    CHECK(a == b * -1.0);
  }
}

TEST_CASE("identical inputs give bit-identical trajectories") {
  auto run = [] {
    Rng rng(43);
    Mat w = random_mat(5, 5, rng);
    Adam adam;
    for (int t = 0; t < 30; ++t) {
      const Mat g = random_mat(5, 5, rng);
      adam.step({{"w", &w, &g}});
    }
    return w;
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite gradient aborts the whole step") {
  Mat a(2, 2, 1.0), b(2, 2, 1.0);
  const Mat ga(2, 2, 0.5);
  Mat gb(2, 2, 0.5);
  gb(1, 0) = std::numeric_limits<double>::infinity();
  Adam adam;
  try {
    adam.step({{"a", &a, &ga}, {"b", &b, &gb}});
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.param() == "b");
  }
  CHECK(a == Mat(2, 2, 1.0));
  CHECK(b == Mat(2, 2, 1.0));
  CHECK(adam.steps() == 0);
  gb(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam.step({{"b", &b, &gb}}), NonFiniteGradient);
}

TEST_CASE("shape mismatch is rejected") {
  Mat w(2, 2);
  const Mat g(2, 3);
  Adam adam;
  CHECK_THROWS_AS(adam.step({{"w", &w, &g}}), ShapeError);
}

TEST_CASE("scheduler: decreasing losses keep the rate") {
  PlateauScheduler s(1e-3);
  double loss = 10.0;
  for (int e = 0; e < 40; ++e) {
    CHECK(s.update(loss) == 1e-3);
    loss *= 0.9;
  }
}

TEST_CASE("scheduler: constant loss with patience 3 decays after epoch 4") {
  PlateauScheduler s(1e-3, {.patience = 3, .factor = 10.0, .threshold = 1e-6, .min_lr = 1e-6});
  CHECK(s.update(1.0) == 1e-3);
  CHECK(s.update(1.0) == 1e-3);
  CHECK(s.update(1.0) == 1e-3);
  CHECK(s.update(1.0) == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("scheduler: default patience decays after patience + 1 epochs") {
  PlateauScheduler s(1e-3);
  for (int e = 0; e < 5; ++e) CHECK(s.update(0.5) == 1e-3);
  CHECK(s.update(0.5) == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("scheduler: floor, monotone rate, bounded stale count") {
  PlateauScheduler s(1e-3, {.patience = 2, .factor = 10.0, .threshold = 1e-6, .min_lr = 1e-6});
  Rng rng(44);
  double prev = s.lr();
  for (int e = 0; e < 200; ++e) {
    const double lr = s.update(e < 100 ? rng.uniform(0.0, 1.0) : 3.0);
    CHECK(lr <= prev);
    CHECK(lr >= 1e-6);
    CHECK(s.stale() <= 2);
    prev = lr;
  }
  CHECK(s.lr() == 1e-6);
}

TEST_CASE("scheduler: improvements below the threshold count as stale") {
  PlateauScheduler s(1e-3, {.patience = 2, .factor = 10.0, .threshold = 1e-6, .min_lr = 1e-6});
  s.update(1.0);
  s.update(1.0 - 5e-7);
  CHECK(s.stale() == 1);
  s.update(0.5);
  CHECK(s.stale() == 0);
  CHECK(s.best() == 0.5);
}
