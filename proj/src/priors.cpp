#include "ssvs/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ssvs/error.hpp"

namespace ssvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const auto d = x.size();
  if (d == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("gamma prior covariance is not positive definite");
  const Eigen::VectorXd z = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + z.squaredNorm());
}

int dim_from_packed(std::size_t packed) {
  int q = 1;
  while (packed_size(q) < packed) ++q;
  if (packed_size(q) != packed) throw ConfigError("gamma vector length is not q(q-1)/2");
  return q;
}

}  // namespace

PriorConfig PriorConfig::from(const Hyperparameters& hp) {
  hp.validate();
  PriorConfig c;
  c.inclusion_prob = hp.inclusion_prob;
  c.h = hp.h;
  c.v = hp.v;
  c.nu = hp.nu;
  c.g_shrink = hp.g_shrink;
  c.r_mean = hp.r_mean;
  c.r_var = hp.r_var;
  c.xi_scale_is_variance = hp.xi_scale_is_variance;
  return c;
}

double log_normal_density(double x, double mean, double var) {
  if (!(var > 0.0)) throw DomainError("normal density: variance must be positive");
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}

double log_half_normal_density(double x, double var) {
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  return std::numbers::ln2 + log_normal_density(x, 0.0, var);
}

double log_inverse_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0) || !(shape > 0.0) || !(scale > 0.0)) {
    throw DomainError("inverse-gamma density: arguments must be positive");
  }
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0) || !(shape > 0.0) || !(rate > 0.0)) {
    throw DomainError("gamma density: arguments must be positive");
  }
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_exponential_density(double x, double rate) {
  if (!(x > 0.0) || !(rate > 0.0)) throw DomainError("exponential density: arguments must be positive");
  return std::log(rate) - rate * x;
}

double log_prior_beta(double beta, double theta, double phi, double sigma2, double g_shrink) {
  if (!(theta > 0.0) || !(phi > 0.0)) throw DomainError("log_prior_beta: theta and phi must be positive");
  return log_normal_density(beta, 0.0, sigma2 / (g_shrink * theta)) +
         log_exponential_density(theta, 0.5 * phi * phi) + log_gamma_density(phi, 1.0, 1.0);
}

double log_prior_lambda(double lambda, bool included, double slab_var, const PriorConfig& cfg) {
  if (lambda < 0.0) throw DomainError("log_prior_lambda: lambda must be >= 0");
  const double indicator = included ? std::log(cfg.inclusion_prob) : std::log1p(-cfg.inclusion_prob);
  return indicator + log_half_normal_density(lambda, slab_var * cfg.h * cfg.h) +
         log_inverse_gamma_density(slab_var, 0.5 * cfg.nu, 0.5 * cfg.v);
}

std::vector<int> free_gamma_coordinates(std::span<const std::uint8_t> active) {
  std::vector<int> out;
  const int q = static_cast<int>(active.size());
  for (int row = 1; row < q; ++row) {
    for (int col = 0; col < row; ++col) {
      if (active[row] && active[col]) out.push_back(static_cast<int>(packed_index(row, col)));
    }
  }
  return out;
}

double log_prior_gamma_free(std::span<const double> r, std::span<const std::uint8_t> active,
                            const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const int q = dim_from_packed(r.size());
  if (static_cast<int>(active.size()) != q || mean.size() != static_cast<Eigen::Index>(r.size()) ||
      cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ConfigError("log_prior_gamma: dimension mismatch");
  }
  const std::vector<int> free = free_gamma_coordinates(active);
  const auto f = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd x(f), mu(f);
  Eigen::MatrixXd s(f, f);
  for (Eigen::Index i = 0; i < f; ++i) {
    x(i) = r[free[i]];
    mu(i) = mean(free[i]);
    for (Eigen::Index j = 0; j < f; ++j) s(i, j) = cov(free[i], free[j]);
  }
  return mvn_log_density(x, mu, s);
}

double log_prior_gamma_vec(std::span<const double> r, std::span<const std::uint8_t> active,
                           const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const double free_part = log_prior_gamma_free(r, active, mean, cov);
  const std::vector<int> free = free_gamma_coordinates(active);
  std::vector<int> fixed;
  for (int j = 0; j < static_cast<int>(r.size()); ++j) {
    if (std::find(free.begin(), free.end(), j) == free.end()) fixed.push_back(j);
  }
  if (fixed.empty()) return free_part;

  const auto f = static_cast<Eigen::Index>(free.size());
  const auto c = static_cast<Eigen::Index>(fixed.size());
  Eigen::VectorXd rf(f), muf(f), rc(c), muc(c);
  Eigen::MatrixXd sff(f, f), scf(c, f), scc(c, c);
  for (Eigen::Index i = 0; i < f; ++i) {
    rf(i) = r[free[i]];
    muf(i) = mean(free[i]);
    for (Eigen::Index j = 0; j < f; ++j) sff(i, j) = cov(free[i], free[j]);
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    rc(i) = r[fixed[i]];
    muc(i) = mean(fixed[i]);
    for (Eigen::Index j = 0; j < f; ++j) scf(i, j) = cov(fixed[i], free[j]);
    for (Eigen::Index j = 0; j < c; ++j) scc(i, j) = cov(fixed[i], fixed[j]);
  }
  Eigen::VectorXd cond_mean = muc;
  Eigen::MatrixXd cond_cov = scc;
  if (f > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(sff);
    if (llt.info() != Eigen::Success) throw ConfigError("gamma prior covariance is not positive definite");
    cond_mean += scf * llt.solve(rf - muf);
    cond_cov -= scf * llt.solve(scf.transpose());
  }
  return free_part + mvn_log_density(rc, cond_mean, cond_cov);
}

double log_prior_xi(double xi, double kappa, double m, bool scale_is_variance) {
  if (!(kappa > 0.0) || !(m > 0.0)) throw DomainError("log_prior_xi: kappa and m must be positive");
  const double var = scale_is_variance ? kappa : kappa * kappa;
  return log_normal_density(xi, 0.0, var) + log_exponential_density(kappa, 0.5 * m * m) +
         log_gamma_density(m, 1.0, 1.0);
}

double log_prior_total(const ParameterState& state, const PriorConfig& cfg, const Family& family,
                       SelectionMode mode) {
  const bool selecting = mode != SelectionMode::no_selection;
  const double log_in = std::log(cfg.inclusion_prob);
  const double log_out = std::log1p(-cfg.inclusion_prob);
  double lp = 0.0;
  for (std::size_t p = 0; p < state.beta.size(); ++p) {
    lp += log_prior_beta(state.beta[p], state.theta[p], state.phi[p], state.sigma2, cfg.g_shrink);
    if (selecting) lp += state.fixed_included[p] ? log_in : log_out;
  }
  for (const auto& bs : state.blocks) {
    const int q = bs.dim();
    for (int k = 0; k < q; ++k) {
      lp += log_prior_lambda(bs.lambda[k], bs.included[k] != 0, bs.slab_var[k], cfg);
      // no-selection: indicators are fixed, not random
      if (!selecting) lp -= log_in;
      for (Eigen::Index i = 0; i < bs.xi.rows(); ++i) {
        lp += log_normal_density(bs.xi(i, k), 0.0,
                                 cfg.xi_scale_is_variance ? bs.xi_scale[k] : bs.xi_scale[k] * bs.xi_scale[k]);
      }
      lp += log_exponential_density(bs.xi_scale[k], 0.5 * bs.xi_rate[k] * bs.xi_rate[k]) +
            log_gamma_density(bs.xi_rate[k], 1.0, 1.0);
    }
    if (mode != SelectionMode::ssvs_diagonal && !bs.r.empty()) {
      // With an isotropic prior the joint over raw r factorizes.
      for (double rv : bs.r) lp += log_normal_density(rv, cfg.r_mean, cfg.r_var);
    }
  }
  if (family.kind == FamilyKind::negative_binomial) {
    lp += log_gamma_density(state.dispersion, cfg.dispersion_shape, cfg.dispersion_rate);
  }
  if (family.kind == FamilyKind::gaussian) {
    lp += log_inverse_gamma_density(state.sigma2, cfg.sigma2_shape, cfg.sigma2_scale);
  }
  return lp;
}

double draw_inverse_gamma(Rng& rng, double shape, double scale) {
  const double log_x = std::log(std::min(scale, std::numeric_limits<double>::max())) - rng.log_gamma_variate(shape);
  return std::clamp(std::exp(std::min(log_x, 700.0)), std::numeric_limits<double>::min(), kMaxVariance);
}

ParameterState sample_prior(const PriorConfig& cfg, const ModelDims& dims, const Family& family,
                            SelectionMode mode, Rng& rng) {
  ParameterState s = make_state(dims);
  const bool selecting = mode != SelectionMode::no_selection;
  if (family.kind == FamilyKind::gaussian) {
    s.sigma2 = draw_inverse_gamma(rng, cfg.sigma2_shape, cfg.sigma2_scale);
  }
  if (family.kind == FamilyKind::negative_binomial) {
    s.dispersion = std::max(std::exp(rng.log_gamma_variate(cfg.dispersion_shape)) / cfg.dispersion_rate,
                            std::numeric_limits<double>::min());
  }
  for (int p = 0; p < dims.fixed; ++p) {
    s.fixed_included[p] = selecting ? static_cast<std::uint8_t>(rng.bernoulli(cfg.inclusion_prob)) : 1;
    s.phi[p] = rng.gamma(1.0);
    s.theta[p] = rng.exponential(0.5 * s.phi[p] * s.phi[p]);
    s.beta[p] = rng.normal(0.0, std::sqrt(s.sigma2 / (cfg.g_shrink * s.theta[p])));
  }
  for (std::size_t b = 0; b < dims.effects.size(); ++b) {
    auto& bs = s.blocks[b];
    const int q = dims.effects[b];
    for (int k = 0; k < q; ++k) {
      bs.included[k] = selecting ? static_cast<std::uint8_t>(rng.bernoulli(cfg.inclusion_prob)) : 1;
      bs.slab_var[k] = draw_inverse_gamma(rng, 0.5 * cfg.nu, 0.5 * cfg.v);
      bs.lambda[k] = rng.half_normal(std::sqrt(bs.slab_var[k]) * cfg.h);
      bs.xi_rate[k] = rng.gamma(1.0);
      bs.xi_scale[k] = rng.exponential(0.5 * bs.xi_rate[k] * bs.xi_rate[k]);
    }
    if (mode != SelectionMode::ssvs_diagonal) {
      for (double& rv : bs.r) rv = rng.normal(cfg.r_mean, std::sqrt(cfg.r_var));
    }
    for (int k = 0; k < q; ++k) {
      const double sd = cfg.xi_scale_is_variance ? std::sqrt(bs.xi_scale[k]) : bs.xi_scale[k];
      for (Eigen::Index i = 0; i < bs.xi.rows(); ++i) bs.xi(i, k) = rng.normal(0.0, sd);
    }
  }
  return s;
}

}  // namespace ssvs
