#include "doctest.h"
#include "ssvs/kernels.hpp"
#include "ssvs/rng.hpp"

#include <cmath>
#include <vector>

using namespace ssvs;
namespace k = ssvs::kernels;

namespace {

double rel_diff(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

struct Inputs {
  std::vector<double> y, eta, dir;
};

Inputs make_inputs(FamilyKind kind, std::size_t n, Rng& rng) {
  Inputs in;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = rng.normal(0.0, 3.0);
    in.eta.push_back(e);
    in.dir.push_back(rng.normal());
    switch (kind) {
      case FamilyKind::poisson:
      case FamilyKind::negative_binomial:
        in.y.push_back(rng.poisson(2.0));
        break;
      case FamilyKind::bernoulli:
        in.y.push_back(rng.uniform() < 0.4 ? 1.0 : 0.0);
        break;
      case FamilyKind::gaussian:
        in.y.push_back(rng.normal(0.0, 2.0));
        break;
    }
  }
  return in;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar kernel matches the textbook terms") {
  const std::vector<double> y{0, 1, 3};
  const std::vector<double> eta{-0.5, 0.2, 1.1};
  double pois = 0.0, bern = 0.0, nb = 0.0, gauss = 0.0;
  for (int i = 0; i < 3; ++i) {
    pois += y[i] * eta[i] - std::exp(eta[i]);
    nb += y[i] * eta[i] - (2.5 + y[i]) * std::log(2.5 + std::exp(eta[i]));
    gauss += -(y[i] - eta[i]) * (y[i] - eta[i]) / (2.0 * 0.7);
  }
  for (int i = 0; i < 2; ++i) bern += y[i] * eta[i] - std::log1p(std::exp(eta[i]));
  const auto& s = k::scalar_table();
  CHECK(s.loglik_sum(FamilyKind::poisson, y.data(), eta.data(), nullptr, 0.0, 3, 1.0) ==
        doctest::Approx(pois).epsilon(1e-14));
  CHECK(s.loglik_sum(FamilyKind::negative_binomial, y.data(), eta.data(), nullptr, 0.0, 3, 2.5) ==
        doctest::Approx(nb).epsilon(1e-14));
  CHECK(s.loglik_sum(FamilyKind::bernoulli, y.data(), eta.data(), nullptr, 0.0, 2, 1.0) ==
        doctest::Approx(bern).epsilon(1e-14));
  CHECK(s.loglik_sum(FamilyKind::gaussian, y.data(), eta.data(), nullptr, 0.0, 3, 0.7) ==
        doctest::Approx(gauss).epsilon(1e-14));
}

TEST_CASE("shifted evaluation equals evaluation at the shifted predictor") {
  Rng rng(21);
  const auto in = make_inputs(FamilyKind::poisson, 29, rng);
  std::vector<double> shifted(in.eta);
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.3 * in.dir[i];
  const auto& s = k::scalar_table();
  const double a = s.loglik_sum(FamilyKind::poisson, in.y.data(), in.eta.data(), in.dir.data(), 0.3,
                                in.y.size(), 1.0);
  const double b = s.loglik_sum(FamilyKind::poisson, in.y.data(), shifted.data(), nullptr, 0.0,
                                in.y.size(), 1.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-13));
}

TEST_CASE("avx2 log-likelihood sums match the scalar reference") {
  const k::KernelTable* avx = k::avx2_table();
  if (avx == nullptr) {
    MESSAGE("AVX2 not available; skipping");
    return;
  }
  Rng rng(22);
  for (auto kind : {FamilyKind::poisson, FamilyKind::negative_binomial, FamilyKind::bernoulli,
                    FamilyKind::gaussian}) {
    for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 37, 1000}) {
      const auto in = make_inputs(kind, n, rng);
      const double disp = kind == FamilyKind::negative_binomial ? 1.7 : 0.9;
      for (const double* dir : {static_cast<const double*>(nullptr), in.dir.data()}) {
        const double a = k::scalar_table().loglik_sum(kind, in.y.data(), in.eta.data(), dir, -0.4,
                                                      n, disp);
        const double b = avx->loglik_sum(kind, in.y.data(), in.eta.data(), dir, -0.4, n, disp);
        CAPTURE(n);
        CHECK(rel_diff(b, a) < 1e-11);
      }
    }
  }
}

TEST_CASE("avx2 kernels handle extreme predictors like the scalar path") {
  const k::KernelTable* avx = k::avx2_table();
  if (avx == nullptr) return;
  const std::vector<double> y{0, 1, 0, 1, 2, 0, 1, 1};
  const std::vector<double> eta{-700, 700, -40, 40, 0, 300, -300, 1e-300};
  const double a = k::scalar_table().loglik_sum(FamilyKind::bernoulli, y.data(), eta.data(), nullptr,
                                                0.0, 8, 1.0);
  const double b = avx->loglik_sum(FamilyKind::bernoulli, y.data(), eta.data(), nullptr, 0.0, 8, 1.0);
  CHECK(rel_diff(b, a) < 1e-12);
  const std::vector<double> pe{-700, 5, -40, 2, 0, 30, -300, 1};
  const double c = k::scalar_table().loglik_sum(FamilyKind::negative_binomial, y.data(), pe.data(),
                                                nullptr, 0.0, 8, 3.0);
  const double d = avx->loglik_sum(FamilyKind::negative_binomial, y.data(), pe.data(), nullptr, 0.0,
                                   8, 3.0);
  CHECK(rel_diff(d, c) < 1e-12);
  const double e = k::scalar_table().loglik_sum(FamilyKind::poisson, y.data(), pe.data(), nullptr,
                                                0.0, 8, 1.0);
  const double f = avx->loglik_sum(FamilyKind::poisson, y.data(), pe.data(), nullptr, 0.0, 8, 1.0);
  CHECK(rel_diff(f, e) < 1e-12);
}

TEST_CASE("avx2 axpy matches the scalar reference") {
  const k::KernelTable* avx = k::avx2_table();
  if (avx == nullptr) return;
  Rng rng(23);
  for (std::size_t n : {0, 1, 3, 4, 9, 33}) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    auto y2 = y;
    k::scalar_table().axpy(1.3, x.data(), y.data(), n);
    avx->axpy(1.3, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y[i]).epsilon(1e-15));
  }
}

TEST_CASE("vector exp and log1p agree with libm") {
  Rng rng(24);
  std::vector<double> x, u;
  for (double v = -745.0; v <= 709.0; v += 0.37) x.push_back(v);
  for (int i = 0; i < 1001; ++i) u.push_back(rng.uniform());
  u.push_back(0.0);
  u.push_back(1.0);
  u.push_back(1e-300);
  std::vector<double> a(x.size()), b(x.size()), c(u.size()), d(u.size());
  k::exp_scalar(x.data(), a.data(), x.size());
  k::exp_avx2(x.data(), b.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CAPTURE(x[i]);
    if (a[i] < 1e-300) {
      CHECK(b[i] <= 1e-300);
    } else {
      CHECK(std::fabs(b[i] - a[i]) <= 4e-16 * a[i]);
    }
  }
  k::log1p_unit_scalar(u.data(), c.data(), u.size());
  k::log1p_unit_avx2(u.data(), d.data(), u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    CAPTURE(u[i]);
    CHECK(std::fabs(d[i] - c[i]) <= 4e-16 * std::max(c[i], 1e-300));
  }
}

TEST_CASE("active table is one of the known tables") {
  const auto& t = k::active();
  CHECK((t.name == "scalar" || t.name == "avx2"));
}

}
