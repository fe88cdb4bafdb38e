#include <cstdlib>
#include <string_view>

#include "ssvs/error.hpp"
#include "ssvs/kernels.hpp"

namespace ssvs::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(SSVS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable kScalar{"scalar", &detail::loglik_sum_scalar, &detail::axpy_scalar};

#if defined(SSVS_HAVE_AVX2)
const KernelTable kAvx2{"avx2", &detail::loglik_sum_avx2, &detail::axpy_avx2};
#endif

const KernelTable& choose() {
  if (const char* env = std::getenv("SSVS_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
    return kScalar;
  }
  if (const KernelTable* t = avx2_table(); t != nullptr) return *t;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(SSVS_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = choose();
  return table;
}

void exp_avx2(const double* x, double* out, std::size_t n) {
#if defined(SSVS_HAVE_AVX2)
  if (avx2_table() != nullptr) {
    detail::exp_avx2_impl(x, out, n);
    return;
  }
#endif
  (void)x;
  (void)out;
  (void)n;
  throw ConfigError("exp_avx2: AVX2 kernels unavailable on this CPU/build");
}

void log1p_unit_avx2(const double* x, double* out, std::size_t n) {
#if defined(SSVS_HAVE_AVX2)
  if (avx2_table() != nullptr) {
    detail::log1p_unit_avx2_impl(x, out, n);
    return;
  }
#endif
  (void)x;
  (void)out;
  (void)n;
  throw ConfigError("log1p_unit_avx2: AVX2 kernels unavailable on this CPU/build");
}

}  // namespace ssvs::kernels
