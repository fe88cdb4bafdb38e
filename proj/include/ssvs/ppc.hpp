#pragma once

#include <string>
#include <vector>

#include "ssvs/model.hpp"
#include "ssvs/rng.hpp"
#include "ssvs/sampler.hpp"

namespace ssvs {

struct PpcOptions {
  int n_rep = 100;
  // Draw fresh random effects from N(0, Omega) of the draw instead of reusing
  // the fitted ones.
  bool marginal = false;
};

// One response vector per replicate, each from a uniformly chosen draw.
std::vector<std::vector<double>> replicate_data(const Trace& trace, const ModelSpec& spec,
                                                const Dataset& data, const PpcOptions& options,
                                                Rng& rng);

struct RootogramBin {
  int count = 0;      // value of the bin; the tail bin holds everything above max_count
  bool tail = false;
  double observed = 0.0;
  double expected = 0.0;
  double sqrt_observed = 0.0;
  double sqrt_expected = 0.0;
};

// Bins 0..max_count, plus a tail bin when any value exceeds max_count.
std::vector<RootogramBin> rootogram(const std::vector<double>& observed,
                                    const std::vector<std::vector<double>>& replicated,
                                    int max_count);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct ScatterSummary {
  MeanSd observed;
  std::vector<MeanSd> replicates;
};

// Sample mean and sd (denominator n - 1).
MeanSd mean_sd(const std::vector<double>& x);
ScatterSummary mean_sd_scatter(const std::vector<double>& observed,
                               const std::vector<std::vector<double>>& replicated);

// Whether the observed (mean, sd) lies within the central `level` mass of
// the replicate cloud, measured by squared Mahalanobis distance from the
// replicate centroid.
bool in_central_cloud(const ScatterSummary& scatter, double level = 0.95);

struct PpcSummary {
  std::vector<RootogramBin> rootogram;
  ScatterSummary scatter;
};

std::string rootogram_csv(const std::vector<RootogramBin>& bins);
std::string scatter_csv(const ScatterSummary& scatter);

}  // namespace ssvs
