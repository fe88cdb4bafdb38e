#pragma once

#include <cstddef>
#include <string_view>

#include "ssvs/family.hpp"

// Inner loops of the likelihood evaluation. Every kernel has a scalar
// reference implementation and, where the CPU supports it, an AVX2/FMA
// variant. The active table is chosen once at startup; tests compare the two
// directly.
namespace ssvs::kernels {

// Sum over i < n of the eta-dependent part of log f(y_i | eta_i + delta * dir_i):
//
//   poisson            y e - exp(e)
//   negative binomial  y e - (s + y) log(s + exp(e))          s = dispersion
//   bernoulli          y e - log(1 + exp(e))
//   gaussian           -(y - e)^2 / (2 dispersion)
//
// The omitted terms depend only on y and the dispersion (see
// model.hpp: log_likelihood for the complete density). `dir == nullptr`
// evaluates at eta itself and ignores delta.
using LoglikSumFn = double (*)(FamilyKind kind, const double* y, const double* eta,
                               const double* dir, double delta, std::size_t n,
                               double dispersion);

// y[i] += a * x[i]
using AxpyFn = void (*)(double a, const double* x, double* y, std::size_t n);

struct KernelTable {
  std::string_view name;
  LoglikSumFn loglik_sum;
  AxpyFn axpy;
};

const KernelTable& scalar_table();

// nullptr when the build or the running CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// Best table for this CPU unless SSVS_SIMD=scalar is set in the environment.
const KernelTable& active();

// Element-wise helpers exposed for the equivalence tests.
void exp_scalar(const double* x, double* out, std::size_t n);
void exp_avx2(const double* x, double* out, std::size_t n);
void log1p_unit_scalar(const double* x, double* out, std::size_t n);
void log1p_unit_avx2(const double* x, double* out, std::size_t n);

namespace detail {
double loglik_sum_scalar(FamilyKind kind, const double* y, const double* eta, const double* dir,
                         double delta, std::size_t n, double dispersion);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
#if defined(SSVS_HAVE_AVX2)
double loglik_sum_avx2(FamilyKind kind, const double* y, const double* eta, const double* dir,
                       double delta, std::size_t n, double dispersion);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void exp_avx2_impl(const double* x, double* out, std::size_t n);
void log1p_unit_avx2_impl(const double* x, double* out, std::size_t n);
#endif
}  // namespace detail

}  // namespace ssvs::kernels
