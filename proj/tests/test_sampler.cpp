#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/error.hpp"
#include "ssvs/sampler.hpp"

#include <cmath>
#include <vector>

using namespace ssvs;

namespace {

// Poisson log-likelihood with eta written out for one q = 2 block.
double direct_loglik(const testing::Problem& p, const ParameterState& s) {
  const auto& b = s.blocks[0];
  const auto& bd = p.data.blocks[0];
  double ll = 0.0;
  for (std::size_t o = 0; o < p.data.size(); ++o) {
    double eta = 0.0;
    for (int j = 0; j < p.data.num_fixed(); ++j) eta += p.data.x(o, j) * s.fixed_included[j] * s.beta[j];
    const int g = bd.group[o];
    const double l0 = b.included[0] ? b.lambda[0] : 0.0;
    const double l1 = b.included[1] ? b.lambda[1] : 0.0;
    const double gam = (b.included[0] && b.included[1]) ? b.r[0] : 0.0;
    const double rho0 = l0 * b.xi(g, 0);
    const double rho1 = l1 * (gam * b.xi(g, 0) + b.xi(g, 1));
    eta += bd.z(o, 0) * rho0 + bd.z(o, 1) * rho1;
    ll += p.data.y[o] * eta - std::exp(eta) - std::lgamma(p.data.y[o] + 1.0);
  }
  return ll;
}

ParameterState some_state(const testing::Problem& p, std::uint64_t seed) {
  ParameterState s = make_state(dims_of(p.data));
  Rng rng(seed);
  for (double& b : s.beta) b = rng.normal(0.0, 0.5);
  auto& bl = s.blocks[0];
  bl.lambda = {0.4, 0.7};
  bl.r = {0.8};
  for (int i = 0; i < bl.xi.rows(); ++i) {
    for (int k = 0; k < bl.xi.cols(); ++k) bl.xi(i, k) = rng.normal();
  }
  return s;
}

SamplerConfig short_config(int chains, int kept) {
  SamplerConfig c;
  c.chains = chains;
  c.adapt = 20;
  c.burn_in = 20;
  c.kept = kept;
  c.seed = 99;
  c.threads = 1;
  return c;
}

std::vector<std::vector<double>> ar1_chains(int chains, int n, double phi, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(chains);
  for (auto& c : out) {
    double x = rng.normal() / std::sqrt(1.0 - phi * phi);
    for (int i = 0; i < n; ++i) {
      x = phi * x + rng.normal();
      c.push_back(x);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("inclusion probability is the prior with no data") {
  auto p = testing::make_problem(FamilyKind::poisson, 0, 0, 2, 2, 61);
  p.spec.hyper.inclusion_prob = 0.3;
  GibbsSampler g(p.spec, p.data);
  auto s = some_state(p, 1);
  CHECK(g.inclusion_probability(IndicatorRef::fixed_effect(1), s) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(g.inclusion_probability(IndicatorRef::random_effect(0, 1), s) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("a zero coefficient leaves the indicator at its prior") {
  auto p = testing::make_problem(FamilyKind::poisson, 4, 3, 3, 2, 62);
  GibbsSampler g(p.spec, p.data);
  auto s = some_state(p, 2);
  s.beta[2] = 0.0;
  CHECK(g.inclusion_probability(IndicatorRef::fixed_effect(2), s) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("inclusion probability matches a brute-force two-branch evaluation") {
  auto p = testing::make_problem(FamilyKind::poisson, 3, 2, 3, 2, 63);
  p.spec.hyper.inclusion_prob = 0.4;
  GibbsSampler g(p.spec, p.data);
  for (int t = 0; t < 5; ++t) {
    auto s = some_state(p, 10 + t);
    s.blocks[0].included = {static_cast<std::uint8_t>(t % 2), 1};
    for (int j = 0; j < 3; ++j) {
      auto on = s, off = s;
      on.fixed_included[j] = 1;
      off.fixed_included[j] = 0;
      const double a = std::log(0.4) + direct_loglik(p, on);
      const double b = std::log(0.6) + direct_loglik(p, off);
      const double expect = 1.0 / (1.0 + std::exp(b - a));
      CHECK(g.inclusion_probability(IndicatorRef::fixed_effect(j), s) == doctest::Approx(expect).epsilon(1e-12));
    }
    for (int k = 0; k < 2; ++k) {
      auto on = s, off = s;
      on.blocks[0].included[k] = 1;
      off.blocks[0].included[k] = 0;
      const double a = std::log(0.4) + direct_loglik(p, on);
      const double b = std::log(0.6) + direct_loglik(p, off);
      const double expect = 1.0 / (1.0 + std::exp(b - a));
      CHECK(g.inclusion_probability(IndicatorRef::random_effect(0, k), s) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("indicator update draws with the computed probability") {
  auto p = testing::make_problem(FamilyKind::poisson, 3, 2, 2, 1, 64);
  GibbsSampler g(p.spec, p.data);
  auto s = make_state(dims_of(p.data));
  s.beta = {0.1, 0.3};
  const double prob = g.inclusion_probability(IndicatorRef::fixed_effect(1), s);
  Rng rng(1);
  int ones = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    g.update_indicator(IndicatorRef::fixed_effect(1), s, rng);
    ones += s.fixed_included[1];
  }
  CHECK(std::fabs(ones / double(n) - prob) < 4.0 * std::sqrt(prob * (1 - prob) / n));
}

TEST_CASE("no-selection mode never changes indicators") {
  auto p = testing::make_problem(FamilyKind::poisson, 5, 4, 3, 2, 65);
  p.spec.mode = SelectionMode::no_selection;
  p.spec.sampler = short_config(2, 50);
  const Trace t = run_chains(p.spec, p.data);
  for (const Draw* d : t.pooled()) {
    for (auto j : d->fixed_included) CHECK(j == 1);
    for (auto i : d->blocks[0].included) CHECK(i == 1);
  }
}

TEST_CASE("run_chains returns chains times kept draws and is seeded") {
  auto p = testing::make_problem(FamilyKind::poisson, 5, 4, 3, 2, 66);
  const auto cfg = short_config(3, 40);
  const Trace a = run_chains(p.spec, p.data, cfg);
  CHECK(a.chains.size() == 3);
  CHECK(a.total_draws() == 120);
  const Trace b = run_chains(p.spec, p.data, cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < a.chains[c].draws.size(); ++i) {
      CHECK(a.chains[c].draws[i].beta == b.chains[c].draws[i].beta);
      CHECK(a.chains[c].draws[i].log_posterior == b.chains[c].draws[i].log_posterior);
    }
  }
  auto cfg2 = cfg;
  cfg2.threads = 3;
  const Trace c = run_chains(p.spec, p.data, cfg2);
  CHECK(c.chains[2].draws.back().beta == a.chains[2].draws.back().beta);
  CHECK(a.chains[0].draws.front().beta != a.chains[1].draws.front().beta);
}

TEST_CASE("thinning and empty runs") {
  auto p = testing::make_problem(FamilyKind::poisson, 5, 4, 2, 1, 67);
  auto cfg = short_config(1, 30);
  cfg.thin = 3;
  CHECK(run_chains(p.spec, p.data, cfg).total_draws() == 10);
  cfg.kept = 0;
  const Trace t = run_chains(p.spec, p.data, cfg);
  CHECK(t.empty());
  CHECK(t.chains.size() == 1);
}

TEST_CASE("recorded draws satisfy the inclusion constraints") {
  auto p = testing::make_problem(FamilyKind::poisson, 6, 5, 3, 3, 68);
  const Trace t = run_chains(p.spec, p.data, short_config(2, 100));
  for (const Draw* d : t.pooled()) {
    const auto& b = d->blocks[0];
    for (int k = 0; k < 3; ++k) {
      if (b.included[k]) continue;
      CHECK(b.lambda[k] == 0.0);
      CHECK(b.omega.row(k).cwiseAbs().maxCoeff() == 0.0);
      CHECK(b.omega.col(k).cwiseAbs().maxCoeff() == 0.0);
      CHECK(b.effects.col(k).cwiseAbs().maxCoeff() == 0.0);
    }
    for (int j = 0; j < 3; ++j) {
      if (!d->fixed_included[j]) CHECK(d->beta[j] == 0.0);
    }
  }
  for (const auto& c : t.chains) CHECK(c.constraint_checks == 100);
}

TEST_CASE("every family runs") {
  for (auto kind : {FamilyKind::poisson, FamilyKind::negative_binomial, FamilyKind::bernoulli,
                    FamilyKind::gaussian}) {
    auto p = testing::make_problem(kind, 6, 4, 3, 2, 69);
    const Trace t = run_chains(p.spec, p.data, short_config(1, 30));
    CHECK(t.total_draws() == 30);
    for (const Draw* d : t.pooled()) CHECK(std::isfinite(d->log_posterior));
  }
}

TEST_CASE("warm start includes everything") {
  auto p = testing::make_problem(FamilyKind::poisson, 6, 4, 3, 2, 70);
  const auto s = warm_start(p.spec, p.data);
  for (auto j : s.fixed_included) CHECK(j == 1);
  for (auto i : s.blocks[0].included) CHECK(i == 1);
  double mean = 0.0;
  for (double y : p.data.y) mean += y;
  mean /= p.data.size();
  CHECK(s.beta[0] == doctest::Approx(std::log(mean + 0.5)));
}

TEST_CASE("scans leave the log posterior finite and the sampler reproducible") {
  auto p = testing::make_problem(FamilyKind::poisson, 6, 4, 3, 2, 71);
  auto s = warm_start(p.spec, p.data);
  Rng a(5), b(5);
  auto s1 = s, s2 = s;
  GibbsSampler g1(p.spec, p.data), g2(p.spec, p.data);
  for (int i = 0; i < 30; ++i) {
    g1.scan(s1, a);
    g2.scan(s2, b);
  }
  CHECK(s1.beta == s2.beta);
  CHECK(std::isfinite(g1.log_posterior(s1)));
  CHECK_NOTHROW(g1.check_constraints(s1));
}

TEST_CASE("scalar and simd kernels give the same chain") {
  if (kernels::avx2_table() == nullptr) return;
  auto p = testing::make_problem(FamilyKind::poisson, 6, 4, 3, 2, 72);
  auto s1 = warm_start(p.spec, p.data);
  auto s2 = s1;
  Rng a(6), b(6);
  GibbsSampler g1(p.spec, p.data, kernels::scalar_table()), g2(p.spec, p.data, *kernels::avx2_table());
  for (int i = 0; i < 20; ++i) {
    g1.scan(s1, a);
    g2.scan(s2, b);
  }
  for (std::size_t j = 0; j < s1.beta.size(); ++j) CHECK(s1.beta[j] == doctest::Approx(s2.beta[j]).epsilon(1e-6));
  CHECK(s1.fixed_included == s2.fixed_included);
}

TEST_CASE("gelman-rubin on well mixed and separated chains") {
  Rng rng(73);
  std::vector<std::vector<double>> iid(4), apart(2);
  for (auto& c : iid) {
    for (int i = 0; i < 2000; ++i) c.push_back(rng.normal());
  }
  CHECK(gelman_rubin(iid) < 1.01);
  for (int i = 0; i < 1000; ++i) {
    apart[0].push_back(rng.normal());
    apart[1].push_back(10.0 + rng.normal());
  }
  CHECK(gelman_rubin(apart) > 1.5);
  std::vector<std::vector<double>> constant(3, std::vector<double>(100, 2.0));
  CHECK(gelman_rubin(constant) == 1.0);
}

TEST_CASE("effective sample size") {
  Rng rng(74);
  std::vector<std::vector<double>> iid(4);
  for (auto& c : iid) {
    for (int i = 0; i < 2500; ++i) c.push_back(rng.normal());
  }
  CHECK(effective_sample_size(iid) == doctest::Approx(10000.0).epsilon(0.2));
  const auto ar = ar1_chains(4, 5000, 0.9, 75);
  CHECK(effective_sample_size(ar) == doctest::Approx(20000.0 * 0.1 / 1.9).epsilon(0.3));
  std::vector<std::vector<double>> constant(2, std::vector<double>(50, 1.0));
  CHECK(effective_sample_size(constant) == 100.0);
  std::vector<std::vector<double>> tiny(1, std::vector<double>(5, 1.0));
  CHECK_THROWS(effective_sample_size(tiny));
}

TEST_CASE("trace-level diagnostics select a quantity") {
  auto p = testing::make_problem(FamilyKind::poisson, 6, 4, 2, 1, 76);
  const Trace t = run_chains(p.spec, p.data, short_config(2, 60));
  const auto lp = [](const Draw& d) { return d.log_posterior; };
  const auto chains = extract(t, lp);
  CHECK(chains.size() == 2);
  CHECK(chains[0].size() == 60);
  CHECK(gelman_rubin(t, lp) == gelman_rubin(chains));
  CHECK(effective_sample_size(t, lp) > 0.0);
}

}
