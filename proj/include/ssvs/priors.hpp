#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "ssvs/model.hpp"
#include "ssvs/rng.hpp"

namespace ssvs {

// Prior hierarchy:
//
//   J_p ~ Bern(pi0)            beta_p ~ N(0, sigma^2 / (g theta_p))
//   theta_p ~ Exp(phi_p^2 / 2) phi_p ~ Gamma(1, 1)
//   I_k ~ Bern(pi0)            lambda_k ~ N+(0, tau_k^2 h^2)
//   tau_k^2 ~ IG(nu / 2, v / 2)
//   r ~ N(mu_r, Sigma_r)       (entries tied to an inactive effect are masked)
//   xi_ik ~ N(0, kappa_k)      kappa_k ~ Exp(m_k^2 / 2)   m_k ~ Gamma(1, 1)
//   negative-binomial size ~ Gamma(0.01, 0.01); gaussian sigma^2 ~ IG(0.01, 0.01)
//
// Excluded coordinates keep the slab prior as their pseudo-prior, so the
// joint prior of the raw values does not depend on the indicators.
struct PriorConfig {
  double inclusion_prob = 0.5;
  double h = 1.0;
  double v = 0.01;
  double nu = 0.01;
  double g_shrink = 1.0;
  double r_mean = 0.0;
  double r_var = 1.0;
  bool xi_scale_is_variance = true;
  double dispersion_shape = 0.01;
  double dispersion_rate = 0.01;
  double sigma2_shape = 0.01;
  double sigma2_scale = 0.01;

  static PriorConfig from(const Hyperparameters& hp);
};

// Variance draws are capped here; IG priors with tiny shape otherwise
// overflow to +inf with non-negligible probability.
inline constexpr double kMaxVariance = 1e200;

// --- elementary log densities -------------------------------------------------

double log_normal_density(double x, double mean, double var);
// N(0, var) truncated to [0, inf).
double log_half_normal_density(double x, double var);
double log_inverse_gamma_density(double x, double shape, double scale);
double log_gamma_density(double x, double shape, double rate);
double log_exponential_density(double x, double rate);

// --- priors of the model ------------------------------------------------------

// Normal + exponential + gamma stages of the shrinkage prior on one coefficient.
double log_prior_beta(double beta, double theta, double phi, double sigma2, double g_shrink);

// Point-mass/slab mixture on one lambda_k plus the IG stage of tau_k^2.
double log_prior_lambda(double lambda, bool included, double slab_var, const PriorConfig& cfg);

// Packed Gamma entries that are free given the active effects (both ends active).
std::vector<int> free_gamma_coordinates(std::span<const std::uint8_t> active);

// Multivariate normal prior on the packed Gamma entries: marginal density of
// the free coordinates plus the pseudo-prior (conditional normal given the
// free ones) of the constrained raw coordinates. `active[k]` is true when
// effect k is in the model.
double log_prior_gamma_vec(std::span<const double> r, std::span<const std::uint8_t> active,
                           const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

// Marginal density of the free coordinates alone.
double log_prior_gamma_free(std::span<const double> r, std::span<const std::uint8_t> active,
                            const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

double log_prior_xi(double xi, double kappa, double m, bool scale_is_variance = true);

// Full joint log prior of a state (indicator probabilities included).
double log_prior_total(const ParameterState& state, const PriorConfig& cfg, const Family& family,
                       SelectionMode mode);

// --- samplers -----------------------------------------------------------------

double draw_inverse_gamma(Rng& rng, double shape, double scale);

// Exact draw from the joint prior. Diagonal mode keeps r at zero;
// no-selection mode fixes every indicator at 1.
ParameterState sample_prior(const PriorConfig& cfg, const ModelDims& dims, const Family& family,
                            SelectionMode mode, Rng& rng);

}  // namespace ssvs
