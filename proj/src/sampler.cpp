#include "ssvs/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "ssvs/error.hpp"

namespace ssvs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogBound = 690.0;
constexpr int kAdaptEvery = 50;
constexpr int kMaxInitTries = 1000;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

// P(on) from the two conditional log-likelihoods.
double inclusion_odds(double prior_logit, double ll_on, double ll_off) {
  if (ll_on == -kInf && ll_off == -kInf) {
    throw SamplerError("indicator update: likelihood is zero in both configurations");
  }
  if (ll_on == -kInf) return 0.0;
  if (ll_off == -kInf) return 1.0;
  const double d = prior_logit + ll_on - ll_off;
  if (std::isnan(d)) throw SamplerError("indicator update: NaN log-odds");
  return sigmoid(d);
}

}  // namespace

double slice_update_fn(const std::function<double(double)>& logdensity, double x0, double width,
                       double lower, double upper, Rng& rng, int max_step_outs, SliceStats* stats) {
  return slice_update(logdensity, x0, width, lower, upper, rng, max_step_outs, stats);
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

TraceLayout TraceLayout::of(const ModelSpec& spec, const Dataset& data) {
  TraceLayout t;
  t.family = spec.family.kind;
  t.fixed = data.fixed_names;
  if (t.fixed.size() != static_cast<std::size_t>(data.num_fixed())) {
    t.fixed.clear();
    for (int p = 0; p < data.num_fixed(); ++p) t.fixed.push_back("x" + std::to_string(p + 1));
  }
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    const auto& bd = data.blocks[b];
    Block blk;
    blk.name = bd.name.empty() && b < spec.random_blocks.size() ? spec.random_blocks[b].name : bd.name;
    blk.effects = bd.effect_names;
    if (blk.effects.size() != static_cast<std::size_t>(bd.dim())) {
      blk.effects.clear();
      for (int k = 0; k < bd.dim(); ++k) blk.effects.push_back("z" + std::to_string(k + 1));
    }
    blk.groups = bd.num_groups();
    t.blocks.push_back(std::move(blk));
  }
  return t;
}

std::size_t Trace::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws.size();
  return n;
}

std::vector<const Draw*> Trace::pooled() const {
  std::vector<const Draw*> out;
  out.reserve(total_draws());
  for (const auto& c : chains) {
    for (const auto& d : c.draws) out.push_back(&d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// GibbsSampler
// ---------------------------------------------------------------------------

struct GibbsSampler::BlockCache {
  EffectiveFactors eff;
  Eigen::MatrixXd rho;  // groups x q
};

GibbsSampler::GibbsSampler(const ModelSpec& spec, const Dataset& data,
                           const kernels::KernelTable& table)
    : spec_(spec),
      data_(data),
      table_(table),
      prior_(PriorConfig::from(spec.hyper)),
      widths_(spec.sampler.widths) {
  if (data.blocks.size() != spec.random_blocks.size()) {
    throw ConfigError("sampler: dataset has " + std::to_string(data.blocks.size()) +
                      " random blocks, model specifies " +
                      std::to_string(spec.random_blocks.size()));
  }
  const std::size_t n = data.size();
  eta_.assign(n, 0.0);
  dir_.assign(n, 0.0);
  tmp_eta_.assign(n, 0.0);
  blocks_.resize(data.blocks.size());
}

GibbsSampler::~GibbsSampler() = default;

double& GibbsSampler::width(int family) {
  switch (family) {
    case kBeta: return widths_.beta;
    case kLogPhi: return widths_.log_phi;
    case kLambda: return widths_.lambda;
    case kR: return widths_.r;
    case kXi: return widths_.xi;
    case kLogKappa: return widths_.log_kappa;
    case kLogM: return widths_.log_m;
    default: return widths_.log_dispersion;
  }
}

void GibbsSampler::rebuild(const ParameterState& state) {
  check_dims(state, data_);
  const std::size_t n = data_.size();
  const int l = data_.num_fixed();
  for (std::size_t o = 0; o < n; ++o) eta_[o] = data_.offset.empty() ? 0.0 : data_.offset[o];
  for (int p = 0; p < l; ++p) {
    if (!state.fixed_included[p] || state.beta[p] == 0.0) continue;
    table_.axpy(state.beta[p], data_.x.col(p).data(), eta_.data(), n);
  }
  for (std::size_t b = 0; b < data_.blocks.size(); ++b) {
    const auto& bd = data_.blocks[b];
    const auto& bs = state.blocks[b];
    auto& cache = blocks_[b];
    cache.eff = effective_factors(bs, spec_.mode);
    const int q = bd.dim();
    const int groups = bd.num_groups();
    cache.rho.resize(groups, q);
    std::vector<double> xi(static_cast<std::size_t>(q));
    std::vector<double> rho(static_cast<std::size_t>(q));
    for (int i = 0; i < groups; ++i) {
      for (int k = 0; k < q; ++k) xi[k] = bs.xi(i, k);
      random_effect_vector(cache.eff, xi.data(), rho.data());
      for (int k = 0; k < q; ++k) cache.rho(i, k) = rho[k];
    }
    for (std::size_t o = 0; o < n; ++o) {
      const int i = bd.group[o];
      double s = 0.0;
      for (int k = 0; k < q; ++k) s += bd.z(static_cast<Eigen::Index>(o), k) * cache.rho(i, k);
      eta_[o] += s;
    }
  }
}

double GibbsSampler::dispersion_arg(const ParameterState& state) const {
  switch (spec_.family.kind) {
    case FamilyKind::negative_binomial: return state.dispersion;
    case FamilyKind::gaussian: return state.sigma2;
    default: return 1.0;
  }
}

double GibbsSampler::kernel(const double* eta, const double* dir, double delta, std::size_t n,
                            double disp) const {
  return table_.loglik_sum(spec_.family.kind, data_.y.data(), eta, dir, delta, n, disp);
}

double GibbsSampler::kernel_at(const double* y, const double* eta, const double* dir,
                               double delta, std::size_t n, double disp) const {
  return table_.loglik_sum(spec_.family.kind, y, eta, dir, delta, n, disp);
}

double GibbsSampler::slice(int family, const std::function<double(double)>& f, double x0,
                           double lower, double upper, Rng& rng) {
  SliceStats local;
  const double x1 =
      slice_update(f, x0, width(family), lower, upper, rng, spec_.sampler.max_step_outs, &local);
  family_stats_[family].merge(local);
  total_stats_.merge(local);
  return x1;
}

void GibbsSampler::adapt() {
  for (int fam = 0; fam < kNumFamilies; ++fam) {
    auto& st = family_stats_[fam];
    if (st.updates >= 10) {
      const double excess = std::clamp(st.mean_step_outs() - 1.0, -1.0, 2.0);
      width(fam) = std::clamp(width(fam) * std::exp(0.5 * excess), 1e-8, 1e8);
    }
    st = SliceStats{};
  }
}

void GibbsSampler::scan(ParameterState& state, Rng& rng) {
  const int period = std::max(1, spec_.sampler.recompute_period);
  if (scans_ % period == 0) {
    rebuild(state);
  } else {
    check_dims(state, data_);
  }
  update_fixed(state, rng);
  for (int b = 0; b < static_cast<int>(data_.blocks.size()); ++b) update_block(b, state, rng);
  update_dispersion(state, rng);
  ++scans_;
  if (adapting_ && scans_ % kAdaptEvery == 0) adapt();
}

// --- indicators ---------------------------------------------------------------

double GibbsSampler::inclusion_probability(const IndicatorRef& which,
                                           const ParameterState& state) {
  rebuild(state);
  const double disp = dispersion_arg(state);
  const double prior_logit = logit(prior_.inclusion_prob);
  const std::size_t n = data_.size();
  const double ll_cur = kernel(eta_.data(), eta_.data(), 0.0, n, disp);
  if (which.is_fixed()) {
    const int p = which.index;
    if (p < 0 || p >= data_.num_fixed()) throw ConfigError("indicator index out of range");
    const double* col = data_.x.col(p).data();
    const bool on = state.fixed_included[p] != 0;
    const double ll_alt = kernel(eta_.data(), col, on ? -state.beta[p] : state.beta[p], n, disp);
    return on ? inclusion_odds(prior_logit, ll_cur, ll_alt)
              : inclusion_odds(prior_logit, ll_alt, ll_cur);
  }
  const int b = which.block;
  if (b >= static_cast<int>(data_.blocks.size()) || which.index < 0 ||
      which.index >= data_.blocks[b].dim()) {
    throw ConfigError("indicator index out of range");
  }
  BlockState alt = state.blocks[b];
  alt.included[which.index] ^= 1;
  const EffectiveFactors eff = effective_factors(alt, spec_.mode);
  Eigen::MatrixXd rho;
  eta_with_block(b, eff, state, tmp_eta_, rho);
  const double ll_alt = kernel(tmp_eta_.data(), tmp_eta_.data(), 0.0, n, disp);
  const bool on = state.blocks[b].included[which.index] != 0;
  return on ? inclusion_odds(prior_logit, ll_cur, ll_alt)
            : inclusion_odds(prior_logit, ll_alt, ll_cur);
}

void GibbsSampler::update_indicator(const IndicatorRef& which, ParameterState& state, Rng& rng) {
  if (spec_.mode == SelectionMode::no_selection) return;
  const double p = inclusion_probability(which, state);
  const std::uint8_t next = rng.uniform() < p ? 1 : 0;
  if (which.is_fixed()) {
    state.fixed_included[which.index] = next;
  } else {
    state.blocks[which.block].included[which.index] = next;
  }
}

// --- fixed effects ------------------------------------------------------------

void GibbsSampler::update_fixed(ParameterState& state, Rng& rng) {
  const int l = data_.num_fixed();
  const std::size_t n = data_.size();
  const double disp = dispersion_arg(state);
  const bool selecting = spec_.mode != SelectionMode::no_selection;
  const double prior_logit = logit(prior_.inclusion_prob);
  const double g = prior_.g_shrink;

  if (selecting) {
    for (int p = 0; p < l; ++p) {
      const double* col = data_.x.col(p).data();
      const bool on = state.fixed_included[p] != 0;
      const double beta = state.beta[p];
      const double ll_cur = kernel(eta_.data(), eta_.data(), 0.0, n, disp);
      const double ll_alt = kernel(eta_.data(), col, on ? -beta : beta, n, disp);
      const double prob = on ? inclusion_odds(prior_logit, ll_cur, ll_alt)
                             : inclusion_odds(prior_logit, ll_alt, ll_cur);
      const bool next = rng.uniform() < prob;
      if (next != on) {
        table_.axpy(next ? beta : -beta, col, eta_.data(), n);
        state.fixed_included[p] = next ? 1 : 0;
      }
    }
  }

  for (int p = 0; p < l; ++p) {
    const double var = std::min(state.sigma2 / (g * state.theta[p]), kMaxVariance);
    if (state.fixed_included[p]) {
      const double* col = data_.x.col(p).data();
      const double b0 = state.beta[p];
      auto f = [&](double b) {
        return kernel(eta_.data(), col, b - b0, n, disp) - 0.5 * b * b / var;
      };
      const double b1 = slice(kBeta, f, b0, -kInf, kInf, rng);
      if (b1 != b0) table_.axpy(b1 - b0, col, eta_.data(), n);
      state.beta[p] = b1;
    } else {
      state.beta[p] = rng.normal(0.0, std::sqrt(var));
    }
  }

  if (spec_.sampler.freeze_fixed_latents) return;
  for (int p = 0; p < l; ++p) {
    const double beta = state.beta[p];
    const double rate = g * beta * beta / (2.0 * state.sigma2) + 0.5 * state.phi[p] * state.phi[p];
    const double th = std::exp(rng.log_gamma_variate(1.5) - std::log(rate));
    state.theta[p] = std::clamp(th, std::numeric_limits<double>::min(), kMaxVariance);
    const double theta = state.theta[p];
    // phi | theta on u = log phi: Exp(phi^2/2) density times Gamma(1,1) prior.
    auto f = [&](double u) {
      const double phi = std::exp(u);
      return 2.0 * u - 0.5 * phi * phi * theta - phi + u;
    };
    const double u1 = slice(kLogPhi, f, std::log(state.phi[p]), -kLogBound, kLogBound, rng);
    state.phi[p] = std::exp(u1);
  }
}

// --- random blocks ------------------------------------------------------------

void GibbsSampler::eta_with_block(int b, const EffectiveFactors& eff, const ParameterState& state,
                                  std::vector<double>& out_eta, Eigen::MatrixXd& out_rho) const {
  const auto& bd = data_.blocks[b];
  const auto& bs = state.blocks[b];
  const auto& cache = blocks_[b];
  const int q = bd.dim();
  const int groups = bd.num_groups();
  out_rho.resize(groups, q);
  std::vector<double> xi(static_cast<std::size_t>(q));
  std::vector<double> rho(static_cast<std::size_t>(q));
  for (int i = 0; i < groups; ++i) {
    for (int k = 0; k < q; ++k) xi[k] = bs.xi(i, k);
    random_effect_vector(eff, xi.data(), rho.data());
    for (int k = 0; k < q; ++k) out_rho(i, k) = rho[k];
  }
  const std::size_t n = data_.size();
  out_eta.resize(n);
  for (std::size_t o = 0; o < n; ++o) {
    const int i = bd.group[o];
    double d = 0.0;
    for (int k = 0; k < q; ++k) {
      d += bd.z(static_cast<Eigen::Index>(o), k) * (out_rho(i, k) - cache.rho(i, k));
    }
    out_eta[o] = eta_[o] + d;
  }
}

void GibbsSampler::update_block(int b, ParameterState& state, Rng& rng) {
  const int q = data_.blocks[b].dim();
  auto& bs = state.blocks[b];
  for (int k = 0; k < q; ++k) {
    if (spec_.mode != SelectionMode::no_selection) update_block_indicator(b, k, state, rng);
    update_lambda(b, k, state, rng);
    const double lam = bs.lambda[k];
    const double shape = 0.5 * prior_.nu + 0.5;
    const double scale = 0.5 * prior_.v + lam * lam / (2.0 * prior_.h * prior_.h);
    bs.slab_var[k] = draw_inverse_gamma(rng, shape, scale);
  }
  if (spec_.mode != SelectionMode::ssvs_diagonal) {
    for (int row = 1; row < q; ++row) {
      for (int col = 0; col < row; ++col) update_gamma_entry(b, row, col, state, rng);
    }
  }
  update_xi(b, state, rng);
  update_xi_scales(b, state, rng);
}

void GibbsSampler::update_block_indicator(int b, int k, ParameterState& state, Rng& rng) {
  auto& bs = state.blocks[b];
  auto& cache = blocks_[b];
  const std::size_t n = data_.size();
  const double disp = dispersion_arg(state);
  BlockState alt = bs;
  alt.included[k] ^= 1;
  EffectiveFactors eff = effective_factors(alt, spec_.mode);
  Eigen::MatrixXd rho;
  eta_with_block(b, eff, state, tmp_eta_, rho);
  const double ll_cur = kernel(eta_.data(), eta_.data(), 0.0, n, disp);
  const double ll_alt = kernel(tmp_eta_.data(), tmp_eta_.data(), 0.0, n, disp);
  const bool on = bs.included[k] != 0;
  const double prior_logit = logit(prior_.inclusion_prob);
  const double prob = on ? inclusion_odds(prior_logit, ll_cur, ll_alt)
                         : inclusion_odds(prior_logit, ll_alt, ll_cur);
  const bool next = rng.uniform() < prob;
  if (next != on) {
    bs.included[k] = next ? 1 : 0;
    eta_.swap(tmp_eta_);
    cache.eff = std::move(eff);
    cache.rho = std::move(rho);
  }
}

void GibbsSampler::update_lambda(int b, int k, ParameterState& state, Rng& rng) {
  auto& bs = state.blocks[b];
  auto& cache = blocks_[b];
  const auto& bd = data_.blocks[b];
  const double slab = std::min(bs.slab_var[k] * prior_.h * prior_.h, kMaxVariance);
  if (!bs.included[k]) {
    bs.lambda[k] = rng.half_normal(std::sqrt(slab));
    return;
  }
  const std::size_t n = data_.size();
  const double disp = dispersion_arg(state);
  const int q = bd.dim();
  const int groups = bd.num_groups();
  const double lam0 = bs.lambda[k];

  if (lam0 == 0.0) {
    // Effect k is switched on but sits at zero: its Gamma links are inactive,
    // so each candidate needs the full block recomputed.
    auto f = [&](double lam) {
      BlockState tmp = bs;
      tmp.lambda[k] = lam;
      const EffectiveFactors eff = effective_factors(tmp, spec_.mode);
      Eigen::MatrixXd rho;
      eta_with_block(b, eff, state, tmp_eta_, rho);
      return kernel(tmp_eta_.data(), tmp_eta_.data(), 0.0, n, disp) - 0.5 * lam * lam / slab;
    };
    bs.lambda[k] = slice(kLambda, f, lam0, 0.0, kInf, rng);
    rebuild(state);
    return;
  }

  // u_i = (Gamma_eff xi_i)_k, so rho_ik = lambda_k u_i.
  std::vector<double> u(static_cast<std::size_t>(groups));
  for (int i = 0; i < groups; ++i) {
    double s = bs.xi(i, k);
    for (int t = 0; t < k; ++t) s += cache.eff.gamma(k, t) * bs.xi(i, t);
    u[i] = s;
  }
  for (std::size_t o = 0; o < n; ++o) {
    dir_[o] = bd.z(static_cast<Eigen::Index>(o), k) * u[bd.group[o]];
  }
  auto f = [&](double lam) {
    return kernel(eta_.data(), dir_.data(), lam - lam0, n, disp) - 0.5 * lam * lam / slab;
  };
  const double lam1 = slice(kLambda, f, lam0, 0.0, kInf, rng);
  if (lam1 == lam0) return;
  if (lam1 == 0.0) {
    bs.lambda[k] = lam1;
    rebuild(state);
    return;
  }
  table_.axpy(lam1 - lam0, dir_.data(), eta_.data(), n);
  bs.lambda[k] = lam1;
  cache.eff.lambda[k] = lam1;
  for (int i = 0; i < groups; ++i) cache.rho(i, k) = lam1 * u[i];
  (void)q;
}

void GibbsSampler::update_gamma_entry(int b, int row, int col, ParameterState& state, Rng& rng) {
  auto& bs = state.blocks[b];
  auto& cache = blocks_[b];
  const auto& bd = data_.blocks[b];
  const std::size_t idx = packed_index(row, col);
  if (!(cache.eff.active(row) && cache.eff.active(col))) {
    bs.r[idx] = rng.normal(prior_.r_mean, std::sqrt(prior_.r_var));
    return;
  }
  const std::size_t n = data_.size();
  const double disp = dispersion_arg(state);
  const double lam = cache.eff.lambda[row];
  for (std::size_t o = 0; o < n; ++o) {
    dir_[o] = bd.z(static_cast<Eigen::Index>(o), row) * lam * bs.xi(bd.group[o], col);
  }
  const double g0 = bs.r[idx];
  const double mu = prior_.r_mean;
  const double var = prior_.r_var;
  auto f = [&](double gv) {
    return kernel(eta_.data(), dir_.data(), gv - g0, n, disp) - 0.5 * (gv - mu) * (gv - mu) / var;
  };
  const double g1 = slice(kR, f, g0, -kInf, kInf, rng);
  if (g1 == g0) return;
  table_.axpy(g1 - g0, dir_.data(), eta_.data(), n);
  bs.r[idx] = g1;
  cache.eff.gamma(row, col) = g1;
  for (int i = 0; i < bd.num_groups(); ++i) cache.rho(i, row) += (g1 - g0) * lam * bs.xi(i, col);
}

void GibbsSampler::update_xi(int b, ParameterState& state, Rng& rng) {
  auto& bs = state.blocks[b];
  auto& cache = blocks_[b];
  const auto& bd = data_.blocks[b];
  const double disp = dispersion_arg(state);
  const int q = bd.dim();
  std::vector<double> w(static_cast<std::size_t>(q));
  for (int i = 0; i < bd.num_groups(); ++i) {
    const auto& members = bd.members[i];
    const std::size_t ni = members.size();
    group_y_.resize(ni);
    group_eta_.resize(ni);
    group_dir_.resize(ni);
    for (std::size_t j = 0; j < ni; ++j) {
      group_y_[j] = data_.y[members[j]];
      group_eta_[j] = eta_[members[j]];
    }
    for (int k = 0; k < q; ++k) {
      const double var = spec_.hyper.xi_scale_is_variance ? bs.xi_scale[k]
                                                          : bs.xi_scale[k] * bs.xi_scale[k];
      if (!cache.eff.active(k)) {
        bs.xi(i, k) = rng.normal(0.0, std::sqrt(var));
        continue;
      }
      for (int s = 0; s < q; ++s) w[s] = s < k ? 0.0 : cache.eff.lambda[s] * cache.eff.gamma(s, k);
      for (std::size_t j = 0; j < ni; ++j) {
        double d = 0.0;
        for (int s = k; s < q; ++s) d += bd.z(members[j], s) * w[s];
        group_dir_[j] = d;
      }
      const double x0 = bs.xi(i, k);
      auto f = [&](double x) {
        return kernel_at(group_y_.data(), group_eta_.data(), group_dir_.data(), x - x0, ni, disp) -
               0.5 * x * x / var;
      };
      const double x1 = slice(kXi, f, x0, -kInf, kInf, rng);
      if (x1 == x0) continue;
      const double delta = x1 - x0;
      table_.axpy(delta, group_dir_.data(), group_eta_.data(), ni);
      bs.xi(i, k) = x1;
      for (int s = k; s < q; ++s) cache.rho(i, s) += delta * w[s];
    }
    for (std::size_t j = 0; j < ni; ++j) eta_[members[j]] = group_eta_[j];
  }
}

void GibbsSampler::update_xi_scales(int b, ParameterState& state, Rng& rng) {
  auto& bs = state.blocks[b];
  const int q = bs.dim();
  const auto groups = static_cast<double>(bs.xi.rows());
  const bool is_var = spec_.hyper.xi_scale_is_variance;
  for (int k = 0; k < q; ++k) {
    const double ss = bs.xi.col(k).squaredNorm();
    const double m = bs.xi_rate[k];
    auto fk = [&](double u) {
      const double kappa = std::exp(u);
      const double ll = is_var ? -0.5 * groups * u - 0.5 * ss / kappa
                               : -groups * u - 0.5 * ss / (kappa * kappa);
      return ll - 0.5 * m * m * kappa + u;
    };
    const double uk = slice(kLogKappa, fk, std::log(bs.xi_scale[k]), -kLogBound, kLogBound, rng);
    bs.xi_scale[k] = std::exp(uk);
    const double kappa = bs.xi_scale[k];
    auto fm = [&](double u) {
      const double mm = std::exp(u);
      return 2.0 * u - 0.5 * mm * mm * kappa - mm + u;
    };
    const double um = slice(kLogM, fm, std::log(bs.xi_rate[k]), -kLogBound, kLogBound, rng);
    bs.xi_rate[k] = std::exp(um);
  }
}

void GibbsSampler::update_dispersion(ParameterState& state, Rng& rng) {
  if (spec_.sampler.freeze_dispersion) return;
  const std::size_t n = data_.size();
  if (spec_.family.kind == FamilyKind::negative_binomial) {
    const double a = prior_.dispersion_shape;
    const double rate = prior_.dispersion_rate;
    const auto nn = static_cast<double>(n);
    auto f = [&](double u) {
      const double s = std::exp(u);
      double c = nn * (s * u - std::lgamma(s));
      for (std::size_t o = 0; o < n; ++o) c += std::lgamma(data_.y[o] + s);
      return kernel(eta_.data(), eta_.data(), 0.0, n, s) + c + (a - 1.0) * u - rate * s + u;
    };
    const double u1 =
        slice(kLogDispersion, f, std::log(state.dispersion), -kLogBound, kLogBound, rng);
    state.dispersion = std::exp(u1);
  } else if (spec_.family.kind == FamilyKind::gaussian) {
    double rss = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      const double r = data_.y[o] - eta_[o];
      rss += r * r;
    }
    double pen = 0.0;
    for (std::size_t p = 0; p < state.beta.size(); ++p) {
      pen += prior_.g_shrink * state.theta[p] * state.beta[p] * state.beta[p];
    }
    const double shape = prior_.sigma2_shape + 0.5 * static_cast<double>(n) +
                         0.5 * static_cast<double>(state.beta.size());
    const double scale = prior_.sigma2_scale + 0.5 * rss + 0.5 * pen;
    state.sigma2 = draw_inverse_gamma(rng, shape, scale);
  }
}

// --- whole-state quantities ---------------------------------------------------

double GibbsSampler::log_posterior(const ParameterState& state) {
  check_dims(state, data_);
  const std::vector<double> eta = linear_predictor_all(spec_, state, data_);
  const Family fam = family_at(spec_.family, state);
  const double ll = kernel(eta.data(), eta.data(), 0.0, eta.size(), dispersion_arg(state)) +
                    likelihood_constant(fam, data_);
  return ll + log_prior_total(state, prior_, spec_.family, spec_.mode);
}

void GibbsSampler::check_constraints(const ParameterState& state) {
  for (std::size_t b = 0; b < state.blocks.size(); ++b) {
    const auto& bs = state.blocks[b];
    const EffectiveFactors eff = effective_factors(bs, spec_.mode);
    const Eigen::MatrixXd omega = assemble_covariance(eff);
    const int q = bs.dim();
    std::vector<double> rho(static_cast<std::size_t>(q));
    std::vector<double> xi(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k) {
      if (bs.included[k]) continue;
      for (int j = 0; j < q; ++j) {
        if (omega(k, j) != 0.0 || omega(j, k) != 0.0) {
          throw SamplerError("constraint violated: block " + std::to_string(b) + " effect " +
                             std::to_string(k) + " is excluded but Omega row/column is nonzero");
        }
      }
    }
    for (Eigen::Index i = 0; i < bs.xi.rows(); ++i) {
      for (int k = 0; k < q; ++k) xi[k] = bs.xi(i, k);
      random_effect_vector(eff, xi.data(), rho.data());
      for (int k = 0; k < q; ++k) {
        if (bs.included[k]) continue;
        const bool cached_nonzero = b < blocks_.size() && blocks_[b].rho.rows() == bs.xi.rows() &&
                                    blocks_[b].rho(i, k) != 0.0;
        if (rho[k] != 0.0 || cached_nonzero) {
          throw SamplerError("constraint violated: block " + std::to_string(b) + " effect " +
                             std::to_string(k) + " is excluded but contributes to eta");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Functional entry points
// ---------------------------------------------------------------------------

void update_indicator(const IndicatorRef& which, ParameterState& state, const ModelSpec& spec,
                      const Dataset& data, Rng& rng) {
  GibbsSampler s(spec, data);
  s.update_indicator(which, state, rng);
}

ParameterState gibbs_scan(ParameterState state, const ModelSpec& spec, const Dataset& data,
                          Rng& rng) {
  GibbsSampler s(spec, data);
  s.scan(state, rng);
  return state;
}

ParameterState warm_start(const ModelSpec& spec, const Dataset& data) {
  ParameterState s = make_state(dims_of(data));
  const std::size_t n = data.size();
  double mean = 0.0;
  for (double v : data.y) mean += v;
  mean /= std::max<std::size_t>(n, 1);
  double var = 0.0;
  for (double v : data.y) var += (v - mean) * (v - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 1.0;

  const bool has_intercept =
      data.num_fixed() > 0 && n > 0 && (data.x.col(0).array() == 1.0).all();
  if (has_intercept) {
    double b0 = 0.0;
    switch (spec.family.kind) {
      case FamilyKind::poisson:
      case FamilyKind::negative_binomial:
        b0 = std::log(mean + 0.5);
        break;
      case FamilyKind::bernoulli: {
        const double p = std::clamp(mean, 0.05, 0.95);
        b0 = std::log(p / (1.0 - p));
        break;
      }
      case FamilyKind::gaussian:
        b0 = mean;
        break;
    }
    s.beta[0] = b0;
  }
  for (auto& bs : s.blocks) {
    std::fill(bs.lambda.begin(), bs.lambda.end(), 0.1);
  }
  if (spec.family.kind == FamilyKind::gaussian) s.sigma2 = var > 0.0 ? var : 1.0;
  return s;
}

Draw record_draw(const ParameterState& state, const ModelSpec& spec, long iteration,
                 double log_posterior) {
  Draw d;
  d.iteration = iteration;
  d.log_posterior = log_posterior;
  d.beta.resize(state.beta.size());
  for (std::size_t p = 0; p < state.beta.size(); ++p) {
    d.beta[p] = state.fixed_included[p] ? state.beta[p] : 0.0;
  }
  d.fixed_included = state.fixed_included;
  for (const auto& bs : state.blocks) {
    DrawBlock db;
    const EffectiveFactors eff = effective_factors(bs, spec.mode);
    db.lambda = eff.lambda;
    db.included = bs.included;
    db.omega = assemble_covariance(eff);
    const int q = bs.dim();
    db.effects.resize(bs.xi.rows(), q);
    std::vector<double> xi(static_cast<std::size_t>(q));
    std::vector<double> rho(static_cast<std::size_t>(q));
    for (Eigen::Index i = 0; i < bs.xi.rows(); ++i) {
      for (int k = 0; k < q; ++k) xi[k] = bs.xi(i, k);
      random_effect_vector(eff, xi.data(), rho.data());
      for (int k = 0; k < q; ++k) db.effects(i, k) = rho[k];
    }
    d.blocks.push_back(std::move(db));
  }
  d.dispersion = state.dispersion;
  d.sigma2 = state.sigma2;
  return d;
}

int default_thread_count() {
  if (const char* env = std::getenv("SSVS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(std::min(v, 256L));
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace {

ParameterState initial_state(const ModelSpec& spec, const Dataset& data, const PriorConfig& prior,
                             Rng& rng) {
  if (spec.sampler.init == InitMode::warm) return warm_start(spec, data);
  const ModelDims dims = dims_of(data);
  for (int attempt = 0; attempt < kMaxInitTries; ++attempt) {
    ParameterState s = sample_prior(prior, dims, spec.family, spec.mode, rng);
    const std::vector<double> eta = linear_predictor_all(spec, s, data);
    const double ll =
        kernels::active().loglik_sum(spec.family.kind, data.y.data(), eta.data(), eta.data(), 0.0,
                                     eta.size(), spec.family.kind == FamilyKind::negative_binomial
                                                     ? s.dispersion
                                                     : s.sigma2);
    if (std::isfinite(ll)) return s;
  }
  throw SamplerError("could not draw a starting state with finite likelihood from the prior");
}

ChainTrace run_one_chain(const ModelSpec& spec, const Dataset& data, int chain) {
  const SamplerConfig& cfg = spec.sampler;
  ChainTrace out;
  out.seed = cfg.seed + static_cast<std::uint64_t>(chain);
  Rng rng(out.seed);
  GibbsSampler sampler(spec, data);
  ParameterState state = initial_state(spec, data, sampler.prior(), rng);

  sampler.set_adapting(true);
  for (int it = 0; it < cfg.adapt; ++it) sampler.scan(state, rng);
  sampler.set_adapting(false);
  for (int it = 0; it < cfg.burn_in; ++it) sampler.scan(state, rng);
  out.draws.reserve(static_cast<std::size_t>(cfg.kept / cfg.thin));
  for (int it = 1; it <= cfg.kept; ++it) {
    sampler.scan(state, rng);
    if (it % cfg.thin != 0) continue;
    if (cfg.check_constraints) {
      sampler.check_constraints(state);
      ++out.constraint_checks;
    }
    const double lp = sampler.log_posterior(state);
    out.draws.push_back(record_draw(state, spec, it, lp));
  }
  out.slice_stats = sampler.stats();
  return out;
}

}  // namespace

Trace run_chains(const ModelSpec& spec, const Dataset& data, const SamplerConfig& config) {
  spec.validate();
  config.validate();
  data.validate(spec.family);
  ModelSpec local = spec;
  local.sampler = config;

  Trace trace;
  trace.layout = TraceLayout::of(spec, data);
  trace.config = config;
  trace.chains.resize(static_cast<std::size_t>(config.chains));

  const int threads =
      std::max(1, std::min(config.threads > 0 ? config.threads : default_thread_count(),
                           config.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
  auto work = [&](int worker) {
    for (int c = worker; c < config.chains; c += threads) {
      try {
        trace.chains[c] = run_one_chain(local, data, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (int c = 0; c < config.chains; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const std::exception& e) {
      throw SamplerError("chain " + std::to_string(c) + " failed: " + e.what());
    }
  }
  return trace;
}

Trace run_chains(const ModelSpec& spec, const Dataset& data) {
  return run_chains(spec, data, spec.sampler);
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

namespace {

std::size_t common_length(const std::vector<std::vector<double>>& chains) {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  return chains.empty() ? 0 : n;
}

double mean_of(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s / static_cast<double>(n);
}

}  // namespace

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t len = common_length(chains);
  if (len < 4) throw ConfigError("gelman_rubin: need chains of at least 4 draws");
  const std::size_t half = len / 2;
  std::vector<const double*> parts;
  for (const auto& c : chains) {
    parts.push_back(c.data());
    parts.push_back(c.data() + (len - half));
  }
  const auto n = static_cast<double>(half);
  const auto m = static_cast<double>(parts.size());
  std::vector<double> means;
  double w = 0.0;
  for (const double* x : parts) {
    const double mu = mean_of(x, half);
    double ss = 0.0;
    for (std::size_t i = 0; i < half; ++i) ss += (x[i] - mu) * (x[i] - mu);
    w += ss / (n - 1.0);
    means.push_back(mu);
  }
  w /= m;
  const double grand = mean_of(means.data(), means.size());
  double bss = 0.0;
  for (double mu : means) bss += (mu - grand) * (mu - grand);
  const double b = n * bss / (m - 1.0);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : kInf;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t n = common_length(chains);
  const std::size_t m = chains.size();
  const double total = static_cast<double>(n * m);
  if (n < 4 || total < 8) throw ConfigError("effective_sample_size: need at least 8 draws");
  const auto nd = static_cast<double>(n);

  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c].data(), n);
  auto acov = [&](std::size_t c, std::size_t lag) {
    const double* x = chains[c].data();
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
    return s / nd;
  };
  std::vector<double> acov0(m);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    acov0[c] = acov(c, 0);
    w += acov0[c] * nd / (nd - 1.0);
  }
  w /= static_cast<double>(m);
  double between = 0.0;
  if (m > 1) {
    const double grand = mean_of(means.data(), m);
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between /= static_cast<double>(m - 1);
  }
  const double var_plus = (nd - 1.0) / nd * w + between;
  if (!(var_plus > 0.0)) return total;

  auto rho = [&](std::size_t lag) {
    double mean_acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) mean_acov += lag == 0 ? acov0[c] : acov(c, lag);
    mean_acov /= static_cast<double>(m);
    return 1.0 - (w - mean_acov) / var_plus;
  };

  double sum = 0.0;
  double prev = kInf;
  for (std::size_t t = 0; 2 * t + 1 < n; ++t) {
    double pair = rho(2 * t) + rho(2 * t + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(total));
  return std::min(total / tau, total * std::log10(total));
}

std::vector<std::vector<double>> extract(const Trace& trace, const DrawSelector& select) {
  std::vector<std::vector<double>> out;
  for (const auto& c : trace.chains) {
    std::vector<double> v;
    v.reserve(c.draws.size());
    for (const auto& d : c.draws) v.push_back(select(d));
    out.push_back(std::move(v));
  }
  return out;
}

double gelman_rubin(const Trace& trace, const DrawSelector& select) {
  return gelman_rubin(extract(trace, select));
}

double effective_sample_size(const Trace& trace, const DrawSelector& select) {
  return effective_sample_size(extract(trace, select));
}

}  // namespace ssvs
