#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/rng.hpp"

#include <cmath>
#include <vector>

using ssvs::Rng;
using testing::mean_of;
using testing::var_of;

TEST_SUITE("rng") {

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays strictly inside the unit interval") {
  Rng rng(1);
  std::vector<double> u;
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    u.push_back(x);
  }
  CHECK(mean_of(u) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var_of(u) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments") {
  Rng rng(2);
  std::vector<double> x;
  for (int i = 0; i < 200000; ++i) x.push_back(rng.normal(3.0, 2.0));
  CHECK(std::fabs(mean_of(x) - 3.0) < 0.02);
  CHECK(var_of(x) == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("gamma moments for small and large shapes") {
  for (double shape : {0.05, 0.3, 1.0, 2.5, 40.0}) {
    Rng rng(3);
    std::vector<double> x;
    for (int i = 0; i < 200000; ++i) x.push_back(rng.gamma(shape));
    CAPTURE(shape);
    CHECK(mean_of(x) == doctest::Approx(shape).epsilon(0.03));
    CHECK(var_of(x) == doctest::Approx(shape).epsilon(0.06));
  }
}

TEST_CASE("log gamma variate agrees with the log of a gamma draw in distribution") {
  Rng rng(4);
  std::vector<double> x;
  for (int i = 0; i < 200000; ++i) x.push_back(std::exp(rng.log_gamma_variate(0.7)));
  CHECK(mean_of(x) == doctest::Approx(0.7).epsilon(0.03));
  Rng tiny(5);
  for (int i = 0; i < 1000; ++i) CHECK(std::isfinite(tiny.log_gamma_variate(1e-4)));
}

TEST_CASE("poisson moments on both sides of the algorithm switch") {
  for (double m : {0.0, 0.3, 4.0, 49.0, 50.0, 300.0}) {
    Rng rng(6);
    std::vector<double> x;
    for (int i = 0; i < 100000; ++i) {
      const double k = rng.poisson(m);
      REQUIRE(k == std::floor(k));
      x.push_back(k);
    }
    CAPTURE(m);
    CHECK(std::fabs(mean_of(x) - m) < 4.0 * std::sqrt((m + 1e-12) / 1e5) + 1e-12);
    if (m > 0.0) CHECK(var_of(x) == doctest::Approx(m).epsilon(0.04));
  }
}

TEST_CASE("negative binomial mean and variance") {
  Rng rng(7);
  std::vector<double> x;
  const double mu = 3.0, size = 2.0;
  for (int i = 0; i < 200000; ++i) x.push_back(rng.negative_binomial(mu, size));
  CHECK(mean_of(x) == doctest::Approx(mu).epsilon(0.02));
  CHECK(var_of(x) == doctest::Approx(mu + mu * mu / size).epsilon(0.04));
}

TEST_CASE("exponential and half normal means") {
  Rng rng(8);
  std::vector<double> e, h;
  for (int i = 0; i < 200000; ++i) {
    e.push_back(rng.exponential(2.0));
    const double v = rng.half_normal(1.5);
    REQUIRE(v >= 0.0);
    h.push_back(v);
  }
  CHECK(mean_of(e) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(mean_of(h) == doctest::Approx(1.5 * std::sqrt(2.0 / M_PI)).epsilon(0.02));
}

TEST_CASE("derived seeds differ by stream and are reproducible") {
  CHECK(ssvs::derive_seed(1, 0) == ssvs::derive_seed(1, 0));
  CHECK(ssvs::derive_seed(1, 0) != ssvs::derive_seed(1, 1));
  CHECK(ssvs::derive_seed(1, 0) != ssvs::derive_seed(2, 0));
}

}
