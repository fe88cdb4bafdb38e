#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssvs/kernels.hpp"
#include "ssvs/model.hpp"
#include "ssvs/priors.hpp"
#include "ssvs/rng.hpp"
#include "ssvs/slice.hpp"

namespace ssvs {

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct DrawBlock {
  std::vector<double> lambda;          // effective lambda (I_k * lambda_k)
  std::vector<std::uint8_t> included;  // I_k
  Eigen::MatrixXd omega;               // q x q covariance
  Eigen::MatrixXd effects;             // groups x q, rho_i = Lambda Gamma xi_i
};

// Compact projection of one recorded state.
struct Draw {
  long iteration = 0;
  double log_posterior = 0.0;
  std::vector<double> beta;                  // effective beta (J_p * beta_p)
  std::vector<std::uint8_t> fixed_included;  // J_p
  std::vector<DrawBlock> blocks;
  double dispersion = 1.0;
  double sigma2 = 1.0;
};

struct TraceLayout {
  struct Block {
    std::string name;
    std::vector<std::string> effects;
    int groups = 0;
  };
  std::vector<std::string> fixed;
  std::vector<Block> blocks;
  FamilyKind family = FamilyKind::poisson;

  static TraceLayout of(const ModelSpec& spec, const Dataset& data);
};

struct ChainTrace {
  std::uint64_t seed = 0;
  std::vector<Draw> draws;
  SliceStats slice_stats;
  long constraint_checks = 0;
};

struct Trace {
  TraceLayout layout;
  SamplerConfig config;
  std::vector<ChainTrace> chains;

  std::size_t total_draws() const;
  bool empty() const { return total_draws() == 0; }
  // All draws, chain by chain.
  std::vector<const Draw*> pooled() const;
};

// ---------------------------------------------------------------------------
// Gibbs engine
// ---------------------------------------------------------------------------

// Which inclusion indicator an update refers to.
struct IndicatorRef {
  int block = -1;  // -1: fixed effect
  int index = 0;

  static IndicatorRef fixed_effect(int p) { return {-1, p}; }
  static IndicatorRef random_effect(int block, int k) { return {block, k}; }
  bool is_fixed() const { return block < 0; }
};

// One chain's Metropolis-within-Gibbs engine. Holds the cached linear
// predictor and per-block effective factors for a state; the Dataset must
// outlive the sampler (its responses may change between scans).
class GibbsSampler {
 public:
  GibbsSampler(const ModelSpec& spec, const Dataset& data,
               const kernels::KernelTable& table = kernels::active());
  ~GibbsSampler();
  GibbsSampler(const GibbsSampler&) = delete;
  GibbsSampler& operator=(const GibbsSampler&) = delete;

  // One full sweep: fixed effects (J_p, beta_p, theta_p, phi_p), then each
  // random block (I_k, lambda_k, tau_k^2, r, xi, kappa_k, m_k), then the
  // family dispersion.
  void scan(ParameterState& state, Rng& rng);

  // Exact full-conditional inclusion probability of one indicator.
  double inclusion_probability(const IndicatorRef& which, const ParameterState& state);
  void update_indicator(const IndicatorRef& which, ParameterState& state, Rng& rng);

  // Log-likelihood + log-prior of a state.
  double log_posterior(const ParameterState& state);

  // Verifies that every inactive random effect has an all-zero row/column in
  // Omega and contributes exactly zero to eta. Throws SamplerError.
  void check_constraints(const ParameterState& state);

  void set_adapting(bool on) { adapting_ = on; }
  const SliceWidths& widths() const { return widths_; }
  const SliceStats& stats() const { return total_stats_; }
  const PriorConfig& prior() const { return prior_; }

 private:
  struct BlockCache;
  // Parameter families sharing one adaptive slice width.
  enum WidthFamily : int {
    kBeta, kLogPhi, kLambda, kR, kXi, kLogKappa, kLogM, kLogDispersion, kNumFamilies
  };
  double& width(int family);

  void rebuild(const ParameterState& state);
  double dispersion_arg(const ParameterState& state) const;
  double kernel(const double* eta, const double* dir, double delta, std::size_t n,
                double disp) const;
  double kernel_at(const double* y, const double* eta, const double* dir, double delta,
                   std::size_t n, double disp) const;
  double slice(int family, const std::function<double(double)>& f, double x0, double lower,
               double upper, Rng& rng);
  void adapt();

  void update_fixed(ParameterState& state, Rng& rng);
  void update_block(int b, ParameterState& state, Rng& rng);
  void update_block_indicator(int b, int k, ParameterState& state, Rng& rng);
  void update_lambda(int b, int k, ParameterState& state, Rng& rng);
  void update_gamma_entry(int b, int row, int col, ParameterState& state, Rng& rng);
  void update_xi(int b, ParameterState& state, Rng& rng);
  void update_xi_scales(int b, ParameterState& state, Rng& rng);
  void update_dispersion(ParameterState& state, Rng& rng);

  // Eta after replacing block b's effective factors with `eff`.
  void eta_with_block(int b, const EffectiveFactors& eff, const ParameterState& state,
                      std::vector<double>& out_eta, Eigen::MatrixXd& out_rho) const;

  const ModelSpec& spec_;
  const Dataset& data_;
  const kernels::KernelTable& table_;
  PriorConfig prior_;
  SliceWidths widths_;
  bool adapting_ = false;
  int scans_ = 0;

  std::vector<double> eta_;
  std::vector<BlockCache> blocks_;
  std::vector<double> dir_;
  std::vector<double> tmp_eta_;
  std::vector<double> group_y_;
  std::vector<double> group_eta_;
  std::vector<double> group_dir_;

  SliceStats family_stats_[kNumFamilies];
  SliceStats total_stats_;
};

// Functional entry points (construct a sampler for one call).
void update_indicator(const IndicatorRef& which, ParameterState& state, const ModelSpec& spec,
                      const Dataset& data, Rng& rng);
ParameterState gibbs_scan(ParameterState state, const ModelSpec& spec, const Dataset& data,
                          Rng& rng);

// Deterministic starting point used by InitMode::warm: everything included,
// small random-effect scales, intercept at the link of the mean response.
ParameterState warm_start(const ModelSpec& spec, const Dataset& data);

Draw record_draw(const ParameterState& state, const ModelSpec& spec, long iteration,
                 double log_posterior);

// Independent chains from prior draws (sub-seeds base + chain index),
// adaptation, burn-in, then thinned recording. Chains run on worker threads.
Trace run_chains(const ModelSpec& spec, const Dataset& data, const SamplerConfig& config);
Trace run_chains(const ModelSpec& spec, const Dataset& data);

// Worker count from SSVS_THREADS, else hardware concurrency (at least 1).
int default_thread_count();

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

using DrawSelector = std::function<double(const Draw&)>;

// Split-chain potential scale reduction. Constant input gives 1.
double gelman_rubin(const std::vector<std::vector<double>>& chains);
double gelman_rubin(const Trace& trace, const DrawSelector& select);

// Multi-chain effective sample size with Geyer's initial monotone sequence;
// capped at N log10(N). Constant input gives N.
double effective_sample_size(const std::vector<std::vector<double>>& chains);
double effective_sample_size(const Trace& trace, const DrawSelector& select);

std::vector<std::vector<double>> extract(const Trace& trace, const DrawSelector& select);

}  // namespace ssvs
