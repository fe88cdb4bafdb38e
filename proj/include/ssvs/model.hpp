#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssvs/family.hpp"
#include "ssvs/reparam.hpp"

namespace ssvs {

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

// One random-effect structure: a grouping column and the columns whose
// coefficients vary by group. "(Intercept)" denotes a column of ones.
struct RandomBlockSpec {
  std::string name;
  std::string group_column;
  std::vector<std::string> effects;
};

struct Hyperparameters {
  double h = 1.0;         // slab scale multiplier for lambda
  double v = 0.01;        // slab variance tau^2 ~ IG(nu / 2, v / 2)
  double nu = 0.01;
  double g_shrink = 1.0;  // beta ~ N(0, sigma^2 / (g theta))
  double inclusion_prob = 0.5;
  // Prior on the packed Gamma entries: N(r_mean * 1, r_var * I).
  double r_mean = 0.0;
  double r_var = 1.0;
  // xi ~ N(0, kappa) when true, N(0, kappa^2) otherwise.
  bool xi_scale_is_variance = true;

  void validate() const;
};

enum class SelectionMode { ssvs_full, ssvs_diagonal, no_selection };

std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view name);

// Initial slice widths per parameter family. Positive parameters are updated
// on the log scale, hence the log_ prefixes.
struct SliceWidths {
  double beta = 0.5;
  double log_phi = 1.0;
  double lambda = 0.25;
  double r = 0.5;
  double xi = 1.0;
  double log_kappa = 1.0;
  double log_m = 1.0;
  double log_dispersion = 0.5;
};

enum class InitMode { prior, warm };

struct SamplerConfig {
  int chains = 3;
  int adapt = 1000;
  int burn_in = 1000;
  int kept = 3000;
  int thin = 1;
  std::uint64_t seed = 20240601;
  SliceWidths widths;
  int max_step_outs = 32;
  // Full recomputation of the cached linear predictor every this many scans.
  int recompute_period = 1;
  InitMode init = InitMode::prior;
  // Hold (theta, phi) or the family dispersion at their initial values. Used
  // for conjugate checks; off in normal runs.
  bool freeze_fixed_latents = false;
  bool freeze_dispersion = false;
  // Assert the inclusion constraints on every recorded draw.
  bool check_constraints = true;
  double rhat_threshold = 1.1;
  // 0 = decide from SSVS_THREADS / hardware concurrency.
  int threads = 0;

  void validate() const;
};

struct ModelSpec {
  Family family;
  std::string response;
  std::vector<std::string> fixed_effects;
  std::vector<RandomBlockSpec> random_blocks;
  std::optional<std::string> offset;
  Hyperparameters hyper;
  SamplerConfig sampler;
  SelectionMode mode = SelectionMode::ssvs_full;

  // Throws ConfigError listing every problem found.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct BlockData {
  std::string name;
  std::vector<std::string> effect_names;
  Eigen::MatrixXd z;                        // observations x q
  std::vector<int> group;                   // dense group index per observation
  std::vector<std::string> group_labels;    // label of each dense index
  std::vector<std::vector<int>> members;    // observations of each group, ascending

  int dim() const { return static_cast<int>(z.cols()); }
  int num_groups() const { return static_cast<int>(group_labels.size()); }
};

struct Dataset {
  std::vector<double> y;
  Eigen::MatrixXd x;  // observations x l
  std::vector<std::string> fixed_names;
  std::vector<BlockData> blocks;
  std::vector<double> offset;  // all zeros when the model has none
  bool has_offset = false;

  // Derived by finalize().
  std::vector<double> log_factorial;  // lgamma(y + 1), zero for gaussian data

  std::size_t size() const { return y.size(); }
  int num_fixed() const { return static_cast<int>(x.cols()); }

  // Builds group membership lists and cached constants, then validates.
  void finalize(const Family& family);
  void validate(const Family& family) const;
};

// ---------------------------------------------------------------------------
// Sampler state
// ---------------------------------------------------------------------------

struct BlockState {
  std::vector<double> lambda;          // raw slab values, >= 0
  std::vector<std::uint8_t> included;  // I_k
  std::vector<double> r;               // raw packed Gamma entries
  Eigen::MatrixXd xi;                  // groups x q latent effects
  std::vector<double> xi_scale;        // kappa_k
  std::vector<double> xi_rate;         // m_k
  std::vector<double> slab_var;        // tau_k^2

  int dim() const { return static_cast<int>(lambda.size()); }
  CholeskyFactors factors() const { return {lambda, r}; }
};

struct ParameterState {
  std::vector<double> beta;                  // raw coefficients
  std::vector<std::uint8_t> fixed_included;  // J_p
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<BlockState> blocks;
  double dispersion = 1.0;  // negative-binomial size; unused otherwise
  double sigma2 = 1.0;      // gaussian residual variance; fixed at 1 otherwise
};

struct ModelDims {
  int fixed = 0;
  std::vector<int> effects;  // q_b per block
  std::vector<int> groups;   // number of groups per block
};

ModelDims dims_of(const Dataset& data);
// All-zero raw values, all indicators on, unit scales.
ParameterState make_state(const ModelDims& dims);
void check_dims(const ParameterState& state, const Dataset& data);

// Effective Lambda/Gamma for a block. Diagonal mode ignores raw r.
EffectiveFactors effective_factors(const BlockState& block, SelectionMode mode);

// Family with the state's current dispersion filled in.
Family family_at(const Family& family, const ParameterState& state);

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

// eta = offset + sum_p X_p J_p beta_p + sum_b Z' Lambda_eff Gamma_eff xi_i
double linear_predictor(const ModelSpec& spec, const ParameterState& state, const Dataset& data,
                        std::size_t obs);
std::vector<double> linear_predictor_all(const ModelSpec& spec, const ParameterState& state,
                                         const Dataset& data);

// log f(y | mu = g^-1(eta)). Returns -inf (not an exception) when the mean
// sits on a boundary that contradicts y.
double log_likelihood(const Family& family, double y, double eta);

// Sum of log_likelihood in observation order.
double total_log_likelihood(const ModelSpec& spec, const ParameterState& state,
                            const Dataset& data);

// Contribution of the observations in one group of one block; the pieces an
// update of that group's xi touches.
double group_log_likelihood(const ModelSpec& spec, const ParameterState& state,
                            const Dataset& data, int block, int group);

// Terms of log f that depend only on y and the dispersion, summed over all
// observations. Together with kernels::LoglikSumFn this gives the full
// log-likelihood.
double likelihood_constant(const Family& family, const Dataset& data);

}  // namespace ssvs
