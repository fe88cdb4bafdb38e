#pragma once

#include <cmath>
#include <numeric>
#include <vector>

namespace testing {

inline double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double var_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Monte Carlo standard error of the mean by non-overlapping batch means.
inline double batch_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[b * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  return std::sqrt(var_of(means) / static_cast<double>(batches));
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace testing

#include <string>

#include "ssvs/model.hpp"
#include "ssvs/rng.hpp"

namespace testing {

// Small synthetic problem: `l` covariates (first is the intercept when
// `intercept`), one block over the first q columns, groups of equal size.
struct Problem {
  ssvs::ModelSpec spec;
  ssvs::Dataset data;
};

inline Problem make_problem(ssvs::FamilyKind kind, int groups, int per_group, int l, int q,
                            std::uint64_t seed, bool intercept = true) {
  using namespace ssvs;
  Problem p;
  p.spec.family = Family::canonical(kind);
  if (p.spec.family.needs_dispersion()) p.spec.family.dispersion = 1.0;
  p.spec.response = "y";
  for (int j = 0; j < l; ++j) {
    p.spec.fixed_effects.push_back(intercept && j == 0 ? "(Intercept)" : "x" + std::to_string(j + 1));
  }
  if (q > 0) {
    RandomBlockSpec b;
    b.name = "g";
    b.group_column = "g";
    b.effects.assign(p.spec.fixed_effects.begin(), p.spec.fixed_effects.begin() + q);
    p.spec.random_blocks.push_back(b);
  }
  Rng rng(seed);
  const int n = groups * per_group;
  p.data.x.resize(n, l);
  for (int o = 0; o < n; ++o) {
    for (int j = 0; j < l; ++j) p.data.x(o, j) = intercept && j == 0 ? 1.0 : rng.normal();
  }
  p.data.fixed_names = p.spec.fixed_effects;
  if (q > 0) {
    BlockData b;
    b.name = "g";
    b.effect_names = p.spec.random_blocks[0].effects;
    b.z = p.data.x.leftCols(q);
    for (int o = 0; o < n; ++o) b.group.push_back(o / per_group);
    for (int g = 0; g < groups; ++g) b.group_labels.push_back("g" + std::to_string(g + 1));
    p.data.blocks.push_back(b);
  }
  p.data.offset.assign(static_cast<std::size_t>(n), 0.0);
  for (int o = 0; o < n; ++o) {
    double eta = 0.3 * p.data.x(o, l - 1);
    switch (kind) {
      case FamilyKind::poisson:
        p.data.y.push_back(rng.poisson(std::exp(eta)));
        break;
      case FamilyKind::negative_binomial:
        p.data.y.push_back(rng.negative_binomial(std::exp(eta), 2.0));
        break;
      case FamilyKind::bernoulli:
        p.data.y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0);
        break;
      case FamilyKind::gaussian:
        p.data.y.push_back(eta + rng.normal());
        break;
    }
  }
  p.data.finalize(p.spec.family);
  return p;
}

}  // namespace testing
