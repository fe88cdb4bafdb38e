#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "ssvs/error.hpp"
#include "ssvs/rng.hpp"

namespace ssvs {

struct SliceStats {
  long updates = 0;
  long step_outs = 0;
  long evaluations = 0;
  long cap_hits = 0;  // stepping out stopped by max_step_outs, fell back to shrinkage

  void merge(const SliceStats& o) {
    updates += o.updates;
    step_outs += o.step_outs;
    evaluations += o.evaluations;
    cap_hits += o.cap_hits;
  }
  double mean_step_outs() const { return updates > 0 ? static_cast<double>(step_outs) / updates : 0.0; }
};

// Univariate slice sampler with stepping out and shrinkage (Neal 2003,
// figs. 3 and 5). `logdensity` may return -inf; points outside
// [lower, upper] are never evaluated. The returned point lies in the slice,
// so the target is left invariant.
template <class F>
double slice_update(F&& logdensity, double x0, double width, double lower, double upper, Rng& rng,
                    int max_step_outs = 32, SliceStats* stats = nullptr) {
  const double f0 = logdensity(x0);
  if (!(f0 > -std::numeric_limits<double>::infinity())) {
    throw SamplerError("slice_update: target density is zero (or NaN) at the current point");
  }
  if (!(x0 >= lower && x0 <= upper)) throw SamplerError("slice_update: current point outside bounds");
  SliceStats local;
  local.updates = 1;
  local.evaluations = 1;

  const double level = f0 - rng.exponential(1.0);
  double left = x0 - width * rng.uniform();
  double right = left + width;
  const auto m = static_cast<long>(max_step_outs);
  long j = static_cast<long>(std::floor(static_cast<double>(m) * rng.uniform()));
  long k = (m > 0 ? m - 1 : 0) - j;

  auto inside = [&](double x) {
    ++local.evaluations;
    return logdensity(x) > level;
  };
  while (left > lower && inside(left)) {
    if (j <= 0) {
      ++local.cap_hits;
      break;
    }
    left -= width;
    --j;
    ++local.step_outs;
  }
  while (right < upper && inside(right)) {
    if (k <= 0) {
      ++local.cap_hits;
      break;
    }
    right += width;
    --k;
    ++local.step_outs;
  }
  left = std::max(left, lower);
  right = std::min(right, upper);

  double x1 = x0;
  for (int iter = 0; iter < 1000; ++iter) {
    x1 = left + (right - left) * rng.uniform();
    ++local.evaluations;
    if (logdensity(x1) > level) break;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
    if (iter == 999) x1 = x0;
  }
  if (stats != nullptr) stats->merge(local);
  return x1;
}

// Type-erased convenience overload.
double slice_update_fn(const std::function<double(double)>& logdensity, double x0, double width,
                       double lower, double upper, Rng& rng, int max_step_outs = 32,
                       SliceStats* stats = nullptr);

}  // namespace ssvs
