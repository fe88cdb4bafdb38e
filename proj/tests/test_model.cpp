#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/error.hpp"
#include "ssvs/kernels.hpp"
#include "ssvs/model.hpp"

#include <cmath>
#include <limits>

using namespace ssvs;

TEST_SUITE("model") {

TEST_CASE("log-likelihood reference values") {
  const Family pois = Family::canonical(FamilyKind::poisson);
  CHECK(log_likelihood(pois, 2.0, std::log(2.0)) == doctest::Approx(-1.3068528194400544).epsilon(1e-14));
  Family nb = Family::canonical(FamilyKind::negative_binomial);
  nb.dispersion = 1.0;
  CHECK(log_likelihood(nb, 0.0, 0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  const Family bern = Family::canonical(FamilyKind::bernoulli);
  CHECK(log_likelihood(bern, 1.0, 0.0) == doctest::Approx(std::log(0.5)));
  CHECK(log_likelihood(bern, 0.0, 800.0) == doctest::Approx(-800.0));
  Family gauss = Family::canonical(FamilyKind::gaussian);
  gauss.dispersion = 4.0;
  CHECK(log_likelihood(gauss, 1.0, 3.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI * 4.0) - 0.5).epsilon(1e-14));
}

TEST_CASE("log-likelihood boundaries return -inf instead of throwing") {
  const Family pois = Family::canonical(FamilyKind::poisson);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_likelihood(pois, 0.0, -inf) == 0.0);
  CHECK(log_likelihood(pois, 1.0, -inf) == -inf);
  CHECK(log_likelihood(pois, 1.0, inf) == -inf);
  CHECK_THROWS_AS(log_likelihood(pois, 1.0, std::nan("")), NumericError);
}

TEST_CASE("negative binomial sums to one over y") {
  Family nb = Family::canonical(FamilyKind::negative_binomial);
  nb.dispersion = 2.5;
  double total = 0.0;
  for (int y = 0; y < 400; ++y) total += std::exp(log_likelihood(nb, y, std::log(3.0)));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("family validation") {
  Family f = Family::canonical(FamilyKind::poisson);
  CHECK_NOTHROW(f.validate());
  f.link = Link::identity;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  Family nb = Family::canonical(FamilyKind::negative_binomial);
  CHECK_NOTHROW(nb.validate());
  nb.dispersion.reset();
  CHECK_THROWS_AS(nb.validate(), ConfigError);
  nb.dispersion = -1.0;
  CHECK_THROWS_AS(nb.validate(), ConfigError);
  CHECK(parse_family_kind("poisson") == FamilyKind::poisson);
  CHECK_THROWS_AS(parse_family_kind("gamma"), ConfigError);
}

TEST_CASE("kernel sum plus constant equals the full log-likelihood") {
  for (auto kind : {FamilyKind::poisson, FamilyKind::negative_binomial, FamilyKind::bernoulli,
                    FamilyKind::gaussian}) {
    auto p = testing::make_problem(kind, 5, 4, 3, 2, 31);
    ParameterState st = make_state(dims_of(p.data));
    st.beta = {0.2, -0.4, 0.7};
    st.blocks[0].lambda = {0.3, 0.5};
    st.blocks[0].r = {0.4};
    Rng rng(1);
    for (int i = 0; i < st.blocks[0].xi.rows(); ++i) {
      for (int k = 0; k < 2; ++k) st.blocks[0].xi(i, k) = rng.normal();
    }
    st.dispersion = 1.0;
    st.sigma2 = 1.0;
    const auto eta = linear_predictor_all(p.spec, st, p.data);
    const Family fam = family_at(p.spec.family, st);
    const double disp = kind == FamilyKind::negative_binomial ? st.dispersion : st.sigma2;
    const double ker = kernels::scalar_table().loglik_sum(kind, p.data.y.data(), eta.data(), nullptr,
                                                          0.0, eta.size(), disp);
    CHECK(ker + likelihood_constant(fam, p.data) ==
          doctest::Approx(total_log_likelihood(p.spec, st, p.data)).epsilon(1e-12));
    double groups = 0.0;
    for (int g = 0; g < p.data.blocks[0].num_groups(); ++g) {
      groups += group_log_likelihood(p.spec, st, p.data, 0, g);
    }
    CHECK(groups == doctest::Approx(total_log_likelihood(p.spec, st, p.data)).epsilon(1e-12));
  }
}

TEST_CASE("linear predictor follows the indicator-masked formula") {
  auto p = testing::make_problem(FamilyKind::poisson, 3, 2, 3, 2, 32);
  ParameterState st = make_state(dims_of(p.data));
  st.beta = {0.5, -1.0, 2.0};
  st.fixed_included = {1, 0, 1};
  auto& b = st.blocks[0];
  b.lambda = {0.4, 0.6};
  b.r = {0.25};
  b.included = {0, 1};
  for (int i = 0; i < 3; ++i) {
    b.xi(i, 0) = 1.0 + i;
    b.xi(i, 1) = -0.5 * i;
  }
  for (std::size_t o = 0; o < p.data.size(); ++o) {
    const int g = p.data.blocks[0].group[o];
    const double x1 = p.data.x(o, 1), x2 = p.data.x(o, 2);
    // effect 0 is out, so gamma(1,0) is dropped and rho_1 = lambda_1 xi_1
    const double expect = 0.5 + 2.0 * x2 + x1 * 0.6 * b.xi(g, 1);
    CHECK(linear_predictor(p.spec, st, p.data, o) == doctest::Approx(expect).epsilon(1e-14));
  }
  st.blocks[0].included = {1, 1};
  for (std::size_t o = 0; o < p.data.size(); ++o) {
    const int g = p.data.blocks[0].group[o];
    const double x1 = p.data.x(o, 1), x2 = p.data.x(o, 2);
    const double rho0 = 0.4 * b.xi(g, 0);
    const double rho1 = 0.6 * (0.25 * b.xi(g, 0) + b.xi(g, 1));
    CHECK(linear_predictor(p.spec, st, p.data, o) ==
          doctest::Approx(0.5 + 2.0 * x2 + rho0 + x1 * rho1).epsilon(1e-14));
  }
}

TEST_CASE("diagonal mode ignores the raw gamma entries") {
  auto p = testing::make_problem(FamilyKind::poisson, 3, 2, 2, 2, 33);
  p.spec.mode = SelectionMode::ssvs_diagonal;
  ParameterState st = make_state(dims_of(p.data));
  st.blocks[0].lambda = {0.4, 0.6};
  st.blocks[0].r = {5.0};
  const auto eff = effective_factors(st.blocks[0], SelectionMode::ssvs_diagonal);
  CHECK(eff.gamma(1, 0) == 0.0);
}

TEST_CASE("dataset validation rejects bad responses") {
  auto p = testing::make_problem(FamilyKind::poisson, 2, 2, 2, 1, 34);
  p.data.y[0] = 1.5;
  CHECK_THROWS_AS(p.data.validate(p.spec.family), ConfigError);
  p.data.y[0] = -1.0;
  CHECK_THROWS_AS(p.data.validate(p.spec.family), ConfigError);
  auto q = testing::make_problem(FamilyKind::bernoulli, 2, 2, 2, 1, 35);
  q.data.y[0] = 2.0;
  CHECK_THROWS_AS(q.data.validate(q.spec.family), ConfigError);
}

TEST_CASE("spec validation") {
  auto p = testing::make_problem(FamilyKind::poisson, 2, 2, 2, 1, 36);
  CHECK_NOTHROW(p.spec.validate());
  p.spec.hyper.h = -1.0;
  CHECK_THROWS_AS(p.spec.validate(), ConfigError);
  p.spec.hyper.h = 1.0;
  p.spec.sampler.chains = 0;
  CHECK_THROWS_AS(p.spec.validate(), ConfigError);
  p.spec.sampler.chains = 2;
  p.spec.hyper.inclusion_prob = 1.0;
  CHECK_THROWS_AS(p.spec.validate(), ConfigError);
}

TEST_CASE("state dimensions follow the dataset") {
  auto p = testing::make_problem(FamilyKind::poisson, 4, 3, 5, 3, 37);
  const auto st = make_state(dims_of(p.data));
  CHECK(st.beta.size() == 5);
  CHECK(st.blocks.size() == 1);
  CHECK(st.blocks[0].r.size() == 3);
  CHECK(st.blocks[0].xi.rows() == 4);
  CHECK(st.blocks[0].xi.cols() == 3);
  CHECK_NOTHROW(check_dims(st, p.data));
  auto bad = st;
  bad.beta.pop_back();
  CHECK_THROWS_AS(check_dims(bad, p.data), ConfigError);
}

}
