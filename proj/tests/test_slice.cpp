#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/slice.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace ssvs;

TEST_SUITE("slice") {

TEST_CASE("samples a standard normal") {
  Rng rng(51);
  double x = 3.0;
  std::vector<double> draws;
  SliceStats stats;
  for (int i = 0; i < 50000; ++i) {
    x = slice_update([](double v) { return -0.5 * v * v; }, x, 1.0, -INFINITY, INFINITY, rng, 32, &stats);
    draws.push_back(x);
  }
  CHECK(std::fabs(testing::mean_of(draws)) < 4.0 * testing::batch_se(draws));
  CHECK(testing::var_of(draws) == doctest::Approx(1.0).epsilon(0.04));
  CHECK(stats.updates == 50000);
  CHECK(stats.evaluations > stats.updates);
}

TEST_CASE("respects bounds and samples an exponential") {
  Rng rng(52);
  double x = 1.0;
  std::vector<double> draws;
  for (int i = 0; i < 50000; ++i) {
    x = slice_update([](double v) { return -2.0 * v; }, x, 0.3, 0.0, INFINITY, rng);
    REQUIRE(x >= 0.0);
    draws.push_back(x);
  }
  CHECK(testing::mean_of(draws) == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("tiny width still mixes through stepping out") {
  Rng rng(53);
  double x = 0.0;
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) {
    x = slice_update([](double v) { return -0.5 * v * v / 100.0; }, x, 0.5, -INFINITY, INFINITY, rng, 200);
    draws.push_back(x);
  }
  CHECK(testing::var_of(draws) == doctest::Approx(100.0).epsilon(0.15));
}

TEST_CASE("zero density at the current point is an error") {
  Rng rng(54);
  CHECK_THROWS_AS(slice_update([](double) { return -std::numeric_limits<double>::infinity(); }, 0.0, 1.0,
                               -1.0, 1.0, rng),
                  SamplerError);
  CHECK_THROWS_AS(slice_update([](double) { return 0.0; }, 2.0, 1.0, -1.0, 1.0, rng), SamplerError);
}

TEST_CASE("type-erased overload is identical") {
  Rng a(55), b(55);
  auto f = [](double v) { return -std::fabs(v); };
  double x = 0.2, y = 0.2;
  for (int i = 0; i < 100; ++i) {
    x = slice_update(f, x, 1.0, -INFINITY, INFINITY, a);
    y = slice_update_fn(f, y, 1.0, -INFINITY, INFINITY, b);
    CHECK(x == y);
  }
}

}
