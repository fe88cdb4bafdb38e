#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/error.hpp"
#include "ssvs/ppc.hpp"

#include <cmath>

using namespace ssvs;

namespace {

// Intercept-only Poisson model with a trace that repeats one state.
struct Degenerate {
  testing::Problem p;
  Trace trace;
};

Degenerate degenerate(double beta0) {
  Degenerate d;
  d.p = testing::make_problem(FamilyKind::poisson, 50, 4, 1, 1, 81);
  ParameterState s = make_state(dims_of(d.p.data));
  s.beta[0] = beta0;
  s.blocks[0].included[0] = 0;
  d.trace.layout = TraceLayout::of(d.p.spec, d.p.data);
  ChainTrace c;
  for (int i = 0; i < 10; ++i) c.draws.push_back(record_draw(s, d.p.spec, i, 0.0));
  d.trace.chains.push_back(c);
  return d;
}

}  // namespace

TEST_SUITE("ppc") {

TEST_CASE("zero replicates") {
  auto d = degenerate(0.0);
  Rng rng(1);
  PpcOptions o;
  o.n_rep = 0;
  CHECK(replicate_data(d.trace, d.p.spec, d.p.data, o, rng).empty());
}

TEST_CASE("degenerate posterior reproduces the known mean") {
  auto d = degenerate(0.0);
  Rng rng(2);
  PpcOptions o;
  o.n_rep = 200;
  const auto reps = replicate_data(d.trace, d.p.spec, d.p.data, o, rng);
  REQUIRE(reps.size() == 200);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : reps) {
    REQUIRE(r.size() == d.p.data.size());
    for (double y : r) total += y;
    n += r.size();
  }
  CHECK(std::fabs(total / n - 1.0) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("replication is seeded") {
  auto d = degenerate(0.3);
  Rng a(3), b(3);
  PpcOptions o;
  o.n_rep = 5;
  o.marginal = true;
  CHECK(replicate_data(d.trace, d.p.spec, d.p.data, o, a) == replicate_data(d.trace, d.p.spec, d.p.data, o, b));
}

TEST_CASE("all-zero data gives a single bin") {
  const std::vector<double> obs(10, 0.0);
  const std::vector<std::vector<double>> reps(3, std::vector<double>(10, 0.0));
  const auto bins = rootogram(obs, reps, 5);
  std::size_t nonzero = 0;
  for (const auto& b : bins) {
    if (b.observed > 0 || b.expected > 0) {
      ++nonzero;
      CHECK(b.count == 0);
      CHECK(b.observed == b.expected);
    }
  }
  CHECK(nonzero == 1);
  CHECK_FALSE(bins.back().tail);
}

TEST_CASE("poisson(1) sample matches the exact pmf") {
  Rng rng(4);
  std::vector<double> obs;
  const int n = 10000;
  for (int i = 0; i < n; ++i) obs.push_back(rng.poisson(1.0));
  const auto bins = rootogram(obs, {}, 8);
  const double p = std::exp(-1.0);
  const double se = std::sqrt(n * p * (1.0 - p));
  CHECK(std::fabs(bins[0].observed - p * n) < 3.0 * se);
  CHECK(std::fabs(bins[1].observed - p * n) < 3.0 * se);
}

TEST_CASE("tail bin conserves the sample size") {
  const std::vector<double> obs{0, 1, 2, 3, 7, 9, 12, 1, 0};
  const std::vector<std::vector<double>> reps{{0, 0, 5, 6, 1, 1, 1, 1, 30}, {2, 2, 2, 2, 2, 2, 2, 2, 2}};
  const auto bins = rootogram(obs, reps, 3);
  double so = 0.0, se = 0.0;
  for (const auto& b : bins) {
    so += b.observed;
    se += b.expected;
    CHECK(b.sqrt_observed == doctest::Approx(std::sqrt(b.observed)));
  }
  CHECK(so == obs.size());
  CHECK(se == doctest::Approx(obs.size()));
  CHECK(bins.back().tail);
  CHECK(bins.back().observed == 3.0);
  CHECK_THROWS_AS(rootogram({0.5}, {}, 3), DomainError);
  CHECK(rootogram_csv(bins).find("4+") != std::string::npos);
}

TEST_CASE("mean and sd summaries") {
  const auto c = mean_sd({3.0, 3.0, 3.0});
  CHECK(c.mean == 3.0);
  CHECK(c.sd == 0.0);
  const auto t = mean_sd({0.0, 2.0});
  CHECK(t.mean == 1.0);
  CHECK(t.sd == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mean_sd({1.0}), DomainError);
  const std::vector<double> obs{1.0, 2.0, 4.0};
  const auto s = mean_sd_scatter(obs, {{0.0, 2.0}, {5.0, 5.0}});
  CHECK(s.observed.mean == mean_sd(obs).mean);
  CHECK(s.observed.sd == mean_sd(obs).sd);
  CHECK(s.replicates.size() == 2);
  CHECK(scatter_csv(s).rfind("observed", std::string::npos) != std::string::npos);
}

TEST_CASE("central cloud membership") {
  Rng rng(5);
  ScatterSummary s;
  for (int i = 0; i < 400; ++i) s.replicates.push_back({rng.normal(), rng.normal(2.0, 0.1)});
  s.observed = {0.0, 2.0};
  CHECK(in_central_cloud(s));
  s.observed = {0.0, 2.5};
  CHECK_FALSE(in_central_cloud(s));
  s.observed = {4.0, 2.0};
  CHECK_FALSE(in_central_cloud(s));
  ScatterSummary few;
  few.replicates = {{0, 1}, {1, 1}};
  CHECK_THROWS_AS(in_central_cloud(few), DomainError);
}

}
