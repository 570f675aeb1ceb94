#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "coordtune/random.hpp"

using namespace coordtune;

TEST_CASE("rng is reproducible per seed") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    if (x != c()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in range and has the right mean") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("index covers the range evenly") {
  Rng rng(3);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[rng.index(6)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS_AS(rng.index(0), std::invalid_argument);
}

TEST_CASE("normal moments") {
  Rng rng(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gamma and beta means") {
  Rng rng(5);
  const int n = 100000;
  for (double shape : {0.5, 1.0, 3.5}) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rng.gamma(shape);
    CHECK(s / n == doctest::Approx(shape).epsilon(0.03));
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.beta(2.0, 5.0);
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    s += x;
  }
  CHECK(s / n == doctest::Approx(2.0 / 7.0).epsilon(0.02));
  CHECK_THROWS(rng.gamma(0.0));
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}
