// AVX2 + FMA variants of the likelihood kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; callers reach it through the dispatch
// table after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "ssvs/kernels.hpp"

namespace ssvs::kernels::detail {

namespace {

// 2^n for integer-valued n in [-1022, 1023].
inline __m256d pow2_int(__m256d n) {
  const __m256d magic = _mm256_set1_pd(0x1.8p52);
  const __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                        _mm256_castpd_si256(magic));
  const __m256i biased = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
  return _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
}

// Cephes exp: range reduction by ln 2 with a two-part constant, rational
// approximation on [-ln2/2, ln2/2], scaling split in two steps so results
// down to the subnormal range and up to DBL_MAX are formed without overflow.
inline __m256d vexp(__m256d x) {
  const __m256d hi_limit = _mm256_set1_pd(709.782712893384);
  const __m256d lo_limit = _mm256_set1_pd(-745.1332191019412);
  const __m256d is_nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d over = _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  xc = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), xc);
  xc = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), xc);
  const __m256d xx = _mm256_mul_pd(xc, xc);

  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, xc);

  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009E0));

  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(r, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  r = _mm256_mul_pd(_mm256_mul_pd(r, pow2_int(n1)), pow2_int(n2));

  r = _mm256_blendv_pd(r, _mm256_set1_pd(HUGE_VAL), over);
  r = _mm256_blendv_pd(r, _mm256_setzero_pd(), under);
  return _mm256_blendv_pd(r, x, is_nan);
}

// Cephes log for normal positive inputs.
inline __m256d vlog(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  // exponent e such that x = m * 2^e with m in [0.5, 1)
  const __m256d magic = _mm256_set1_pd(0x1.0p52);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(exp_bits, _mm256_castpd_si256(magic))), magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
                      _mm256_set1_epi64x(0x3fe0000000000000LL)));

  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, _mm256_set1_pd(1.0)));
  m = _mm256_sub_pd(_mm256_add_pd(m, _mm256_and_pd(small, m)), _mm256_set1_pd(1.0));

  const __m256d z = _mm256_mul_pd(m, m);
  __m256d p = _mm256_set1_pd(1.01875663804580931796E-4);
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(4.97494994976747001425E-1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(4.70579119878881725854E0));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.44989225341610930846E1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.79368678507819816313E1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(7.70838733755885391666E0));

  __m256d q = _mm256_add_pd(m, _mm256_set1_pd(1.12873587189167450590E1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(4.52279145837532221105E1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(8.29875266912776603211E1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(7.11544750618563894466E1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(2.31251620126765340583E1));

  __m256d y = _mm256_mul_pd(m, _mm256_div_pd(_mm256_mul_pd(z, p), q));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(z, _mm256_set1_pd(0.5), y);
  __m256d out = _mm256_add_pd(m, y);
  out = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), out);
  return out;
}

// log1p(u) for u in [0, 1] (the only range the kernels need), with the
// classic correction for the rounding of 1 + u.
inline __m256d vlog1p_unit(__m256d u) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d w = _mm256_add_pd(one, u);
  const __m256d corr = _mm256_div_pd(_mm256_sub_pd(_mm256_sub_pd(w, one), u), w);
  const __m256d res = _mm256_sub_pd(vlog(w), corr);
  // w == 1 exactly: log1p(u) == u to full precision
  const __m256d exact = _mm256_cmp_pd(w, one, _CMP_EQ_OQ);
  return _mm256_blendv_pd(res, u, exact);
}

inline __m256d vabs(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

inline __m256d vsoftplus(__m256d e) {
  const __m256d t = vexp(_mm256_sub_pd(_mm256_setzero_pd(), vabs(e)));
  return _mm256_add_pd(_mm256_max_pd(e, _mm256_setzero_pd()), vlog1p_unit(t));
}

inline __m256d vlog_add_exp(__m256d a, __m256d b) {
  const __m256d t = vexp(_mm256_sub_pd(_mm256_setzero_pd(), vabs(_mm256_sub_pd(a, b))));
  return _mm256_add_pd(_mm256_max_pd(a, b), vlog1p_unit(t));
}

inline __m256i tail_mask(std::size_t rem) {
  alignas(32) long long m[4];
  for (std::size_t j = 0; j < 4; ++j) m[j] = j < rem ? -1LL : 0LL;
  return _mm256_load_si256(reinterpret_cast<const __m256i*>(m));
}

template <class Term>
double accumulate(const double* y, const double* eta, const double* dir, double delta,
                  std::size_t n, Term term) {
  __m256d acc = _mm256_setzero_pd();
  const __m256d vd = _mm256_set1_pd(delta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d e = _mm256_loadu_pd(eta + i);
    if (dir != nullptr) e = _mm256_fmadd_pd(vd, _mm256_loadu_pd(dir + i), e);
    acc = _mm256_add_pd(acc, term(_mm256_loadu_pd(y + i), e));
  }
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    __m256d e = _mm256_maskload_pd(eta + i, mask);
    if (dir != nullptr) e = _mm256_fmadd_pd(vd, _mm256_maskload_pd(dir + i, mask), e);
    const __m256d t = term(_mm256_maskload_pd(y + i, mask), e);
    acc = _mm256_add_pd(acc, _mm256_and_pd(t, _mm256_castsi256_pd(mask)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

}  // namespace

double loglik_sum_avx2(FamilyKind kind, const double* y, const double* eta, const double* dir,
                       double delta, std::size_t n, double dispersion) {
  switch (kind) {
    case FamilyKind::poisson:
      return accumulate(y, eta, dir, delta, n, [](__m256d yi, __m256d e) {
        return _mm256_fmsub_pd(yi, e, vexp(e));
      });
    case FamilyKind::negative_binomial: {
      const __m256d size = _mm256_set1_pd(dispersion);
      const __m256d log_size = _mm256_set1_pd(std::log(dispersion));
      return accumulate(y, eta, dir, delta, n, [=](__m256d yi, __m256d e) {
        const __m256d lse = vlog_add_exp(log_size, e);
        return _mm256_fnmadd_pd(_mm256_add_pd(size, yi), lse, _mm256_mul_pd(yi, e));
      });
    }
    case FamilyKind::bernoulli:
      return accumulate(y, eta, dir, delta, n, [](__m256d yi, __m256d e) {
        return _mm256_fmsub_pd(yi, e, vsoftplus(e));
      });
    case FamilyKind::gaussian: {
      const __m256d neg_inv2s = _mm256_set1_pd(-0.5 / dispersion);
      return accumulate(y, eta, dir, delta, n, [=](__m256d yi, __m256d e) {
        const __m256d d = _mm256_sub_pd(yi, e);
        return _mm256_mul_pd(_mm256_mul_pd(d, d), neg_inv2s);
      });
    }
  }
  return 0.0;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void exp_avx2_impl(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, vexp(_mm256_loadu_pd(x + i)));
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    _mm256_maskstore_pd(out + i, mask, vexp(_mm256_maskload_pd(x + i, mask)));
  }
}

void log1p_unit_avx2_impl(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, vlog1p_unit(_mm256_loadu_pd(x + i)));
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    _mm256_maskstore_pd(out + i, mask, vlog1p_unit(_mm256_maskload_pd(x + i, mask)));
  }
}

}  // namespace ssvs::kernels::detail
