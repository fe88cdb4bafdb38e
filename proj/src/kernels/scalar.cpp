#include <algorithm>
#include <cmath>

#include "ssvs/kernels.hpp"

namespace ssvs::kernels {

namespace {

inline double softplus(double e) { return std::max(e, 0.0) + std::log1p(std::exp(-std::fabs(e))); }

// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
  return std::max(a, b) + std::log1p(std::exp(-std::fabs(a - b)));
}

template <class Term>
double accumulate(const double* y, const double* eta, const double* dir, double delta,
                  std::size_t n, Term term) {
  // Four interleaved partial sums, combined in a fixed order.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  if (dir == nullptr) {
    for (std::size_t i = 0; i < n; ++i) acc[i & 3] += term(y[i], eta[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) acc[i & 3] += term(y[i], eta[i] + delta * dir[i]);
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

namespace detail {

double loglik_sum_scalar(FamilyKind kind, const double* y, const double* eta, const double* dir,
                         double delta, std::size_t n, double dispersion) {
  switch (kind) {
    case FamilyKind::poisson:
      return accumulate(y, eta, dir, delta, n,
                        [](double yi, double e) { return yi * e - std::exp(e); });
    case FamilyKind::negative_binomial: {
      const double size = dispersion;
      const double log_size = std::log(size);
      return accumulate(y, eta, dir, delta, n, [=](double yi, double e) {
        return yi * e - (size + yi) * log_add_exp(log_size, e);
      });
    }
    case FamilyKind::bernoulli:
      return accumulate(y, eta, dir, delta, n,
                        [](double yi, double e) { return yi * e - softplus(e); });
    case FamilyKind::gaussian: {
      const double inv2s = 0.5 / dispersion;
      return accumulate(y, eta, dir, delta, n, [=](double yi, double e) {
        const double d = yi - e;
        return -d * d * inv2s;
      });
    }
  }
  return 0.0;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace detail

void exp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void log1p_unit_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log1p(x[i]);
}

}  // namespace ssvs::kernels
