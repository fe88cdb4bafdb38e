#include "ssvs/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "ssvs/error.hpp"

namespace ssvs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  return std::max(a, b) + std::log1p(std::exp(-std::fabs(a - b)));
}

void throw_if_problems(const std::vector<std::string>& problems, std::string_view what) {
  if (problems.empty()) return;
  std::ostringstream msg;
  msg << what << ": ";
  for (std::size_t i = 0; i < problems.size(); ++i) msg << (i ? "; " : "") << problems[i];
  throw ConfigError(msg.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Family
// ---------------------------------------------------------------------------

Link canonical_link(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::poisson:
    case FamilyKind::negative_binomial:
      return Link::log;
    case FamilyKind::bernoulli:
      return Link::logit;
    case FamilyKind::gaussian:
      return Link::identity;
  }
  return Link::identity;
}

Family Family::canonical(FamilyKind kind) {
  Family f;
  f.kind = kind;
  f.link = canonical_link(kind);
  if (kind == FamilyKind::negative_binomial || kind == FamilyKind::gaussian) f.dispersion = 1.0;
  return f;
}

void Family::validate() const {
  if (link != canonical_link(kind)) {
    throw ConfigError("unsupported family/link combination: " + std::string(to_string(kind)) + "/" +
                      std::string(to_string(link)));
  }
  if (needs_dispersion()) {
    if (!dispersion) throw ConfigError(std::string(to_string(kind)) + " family needs a dispersion");
    if (!(*dispersion > 0.0) || !std::isfinite(*dispersion)) {
      throw ConfigError("dispersion must be positive and finite");
    }
  } else if (dispersion) {
    throw ConfigError(std::string(to_string(kind)) + " family has no dispersion parameter");
  }
}

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::poisson:
      return "poisson";
    case FamilyKind::negative_binomial:
      return "negative-binomial";
    case FamilyKind::bernoulli:
      return "bernoulli";
    case FamilyKind::gaussian:
      return "gaussian";
  }
  return "?";
}

std::string_view to_string(Link link) {
  switch (link) {
    case Link::log:
      return "log";
    case Link::logit:
      return "logit";
    case Link::identity:
      return "identity";
  }
  return "?";
}

FamilyKind parse_family_kind(std::string_view name) {
  if (name == "poisson") return FamilyKind::poisson;
  if (name == "negative_binomial" || name == "negative-binomial" || name == "negbin" || name == "nbinom2") {
    return FamilyKind::negative_binomial;
  }
  if (name == "bernoulli" || name == "binomial") return FamilyKind::bernoulli;
  if (name == "gaussian" || name == "normal") return FamilyKind::gaussian;
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

Link parse_link(std::string_view name) {
  if (name == "log") return Link::log;
  if (name == "logit") return Link::logit;
  if (name == "identity") return Link::identity;
  throw ConfigError("unknown link '" + std::string(name) + "'");
}

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::ssvs_full:
      return "ssvs-full";
    case SelectionMode::ssvs_diagonal:
      return "ssvs-diagonal";
    case SelectionMode::no_selection:
      return "no-selection";
  }
  return "?";
}

SelectionMode parse_selection_mode(std::string_view name) {
  if (name == "ssvs-full" || name == "full") return SelectionMode::ssvs_full;
  if (name == "ssvs-diagonal" || name == "diagonal") return SelectionMode::ssvs_diagonal;
  if (name == "no-selection" || name == "basic") return SelectionMode::no_selection;
  throw ConfigError("unknown selection mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Spec validation
// ---------------------------------------------------------------------------

void Hyperparameters::validate() const {
  std::vector<std::string> problems;
  auto positive = [&](double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) problems.push_back(std::string(name) + " must be > 0");
  };
  positive(h, "h");
  positive(v, "v");
  positive(nu, "nu");
  positive(g_shrink, "g_shrink");
  positive(r_var, "r_var");
  if (!(inclusion_prob > 0.0 && inclusion_prob < 1.0)) {
    problems.push_back("inclusion_prob must lie in (0, 1)");
  }
  if (!std::isfinite(r_mean)) problems.push_back("r_mean must be finite");
  throw_if_problems(problems, "invalid hyperparameters");
}

void SamplerConfig::validate() const {
  std::vector<std::string> problems;
  if (chains < 1) problems.push_back("chains must be >= 1");
  if (adapt < 0 || burn_in < 0 || kept < 0) problems.push_back("iteration counts must be >= 0");
  if (thin < 1) problems.push_back("thin must be >= 1");
  if (max_step_outs < 0) problems.push_back("max_step_outs must be >= 0");
  if (recompute_period < 1) problems.push_back("recompute_period must be >= 1");
  const double w[] = {widths.beta,  widths.log_phi,   widths.lambda, widths.r,
                      widths.xi,    widths.log_kappa, widths.log_m,  widths.log_dispersion};
  for (double x : w) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      problems.push_back("slice widths must be > 0");
      break;
    }
  }
  throw_if_problems(problems, "invalid sampler settings");
}

void ModelSpec::validate() const {
  std::vector<std::string> problems;
  try {
    family.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  if (response.empty()) problems.push_back("response column is required");
  if (fixed_effects.empty()) problems.push_back("at least one fixed effect is required");
  std::set<std::string> seen;
  for (const auto& c : fixed_effects) {
    if (!seen.insert(c).second) problems.push_back("duplicate fixed effect '" + c + "'");
  }
  std::set<std::string> block_names;
  for (const auto& b : random_blocks) {
    if (b.group_column.empty()) problems.push_back("random block '" + b.name + "' needs a group column");
    if (b.effects.empty()) problems.push_back("random block '" + b.name + "' has no effects");
    if (!block_names.insert(b.name).second) problems.push_back("duplicate random block '" + b.name + "'");
    std::set<std::string> effects;
    for (const auto& c : b.effects) {
      if (!effects.insert(c).second) {
        problems.push_back("duplicate effect '" + c + "' in block '" + b.name + "'");
      }
    }
  }
  try {
    hyper.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  try {
    sampler.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  throw_if_problems(problems, "invalid model spec");
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

void Dataset::finalize(const Family& family) {
  const std::size_t n = size();
  if (offset.empty()) offset.assign(n, 0.0);
  log_factorial.assign(n, 0.0);
  if (family.is_count()) {
    for (std::size_t i = 0; i < n; ++i) log_factorial[i] = std::lgamma(y[i] + 1.0);
  }
  for (auto& b : blocks) {
    b.members.assign(static_cast<std::size_t>(b.num_groups()), {});
    for (std::size_t i = 0; i < b.group.size(); ++i) {
      const int g = b.group[i];
      if (g >= 0 && g < b.num_groups()) b.members[static_cast<std::size_t>(g)].push_back(static_cast<int>(i));
    }
  }
  validate(family);
}

void Dataset::validate(const Family& family) const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(x.rows()) != n) throw ConfigError("fixed design rows != responses");
  if (offset.size() != n) throw ConfigError("offset length != responses");
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[i];
    if (!std::isfinite(yi)) throw ConfigError("response " + std::to_string(i) + " is not finite");
    if (family.is_count() && (yi < 0.0 || yi != std::floor(yi))) {
      throw ConfigError("response " + std::to_string(i) + " is not a nonnegative integer");
    }
    if (family.kind == FamilyKind::bernoulli && yi > 1.0) {
      throw ConfigError("bernoulli response " + std::to_string(i) + " is not 0/1");
    }
    if (!std::isfinite(offset[i])) throw ConfigError("offset " + std::to_string(i) + " is not finite");
  }
  if (!x.allFinite()) throw ConfigError("fixed design contains non-finite values");
  for (const auto& b : blocks) {
    if (static_cast<std::size_t>(b.z.rows()) != n || b.group.size() != n) {
      throw ConfigError("random block '" + b.name + "' has wrong number of rows");
    }
    if (!b.z.allFinite()) throw ConfigError("random design of block '" + b.name + "' is not finite");
    for (std::size_t i = 0; i < n; ++i) {
      if (b.group[i] < 0 || b.group[i] >= b.num_groups()) {
        throw ConfigError("observation " + std::to_string(i) + " has no group in block '" + b.name + "'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// State helpers
// ---------------------------------------------------------------------------

ModelDims dims_of(const Dataset& data) {
  ModelDims d;
  d.fixed = data.num_fixed();
  for (const auto& b : data.blocks) {
    d.effects.push_back(b.dim());
    d.groups.push_back(b.num_groups());
  }
  return d;
}

ParameterState make_state(const ModelDims& dims) {
  ParameterState s;
  const auto l = static_cast<std::size_t>(dims.fixed);
  s.beta.assign(l, 0.0);
  s.fixed_included.assign(l, 1);
  s.theta.assign(l, 1.0);
  s.phi.assign(l, 1.0);
  for (std::size_t b = 0; b < dims.effects.size(); ++b) {
    const int q = dims.effects[b];
    BlockState bs;
    bs.lambda.assign(static_cast<std::size_t>(q), 0.0);
    bs.included.assign(static_cast<std::size_t>(q), 1);
    bs.r.assign(packed_size(q), 0.0);
    bs.xi = Eigen::MatrixXd::Zero(dims.groups[b], q);
    bs.xi_scale.assign(static_cast<std::size_t>(q), 1.0);
    bs.xi_rate.assign(static_cast<std::size_t>(q), 1.0);
    bs.slab_var.assign(static_cast<std::size_t>(q), 1.0);
    s.blocks.push_back(std::move(bs));
  }
  return s;
}

void check_dims(const ParameterState& state, const Dataset& data) {
  const auto l = static_cast<std::size_t>(data.num_fixed());
  if (state.beta.size() != l || state.fixed_included.size() != l || state.theta.size() != l ||
      state.phi.size() != l) {
    throw ConfigError("state fixed-effect dimension does not match data");
  }
  if (state.blocks.size() != data.blocks.size()) throw ConfigError("state block count does not match data");
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    const auto& bs = state.blocks[b];
    const int q = data.blocks[b].dim();
    if (bs.dim() != q || static_cast<int>(bs.included.size()) != q || bs.r.size() != packed_size(q) ||
        bs.xi.rows() != data.blocks[b].num_groups() || bs.xi.cols() != q ||
        static_cast<int>(bs.xi_scale.size()) != q || static_cast<int>(bs.xi_rate.size()) != q ||
        static_cast<int>(bs.slab_var.size()) != q) {
      throw ConfigError("state dimensions do not match random block '" + data.blocks[b].name + "'");
    }
  }
}

EffectiveFactors effective_factors(const BlockState& block, SelectionMode mode) {
  if (mode == SelectionMode::ssvs_diagonal) {
    CholeskyFactors diag{block.lambda, std::vector<double>(block.r.size(), 0.0)};
    return project_constraints(diag, block.included);
  }
  return project_constraints(block.factors(), block.included);
}

Family family_at(const Family& family, const ParameterState& state) {
  Family f = family;
  if (family.kind == FamilyKind::negative_binomial) f.dispersion = state.dispersion;
  if (family.kind == FamilyKind::gaussian) f.dispersion = state.sigma2;
  return f;
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

namespace {

double fixed_part(const ParameterState& state, const Dataset& data, std::size_t obs) {
  double eta = data.offset[obs];
  for (int p = 0; p < data.num_fixed(); ++p) {
    if (state.fixed_included[p]) eta += data.x(static_cast<Eigen::Index>(obs), p) * state.beta[p];
  }
  return eta;
}

double random_part(const EffectiveFactors& eff, const BlockState& bs, const BlockData& bd,
                   std::size_t obs, std::vector<double>& xi_buf, std::vector<double>& rho_buf) {
  const int q = bd.dim();
  const int g = bd.group[obs];
  xi_buf.resize(static_cast<std::size_t>(q));
  rho_buf.resize(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) xi_buf[k] = bs.xi(g, k);
  random_effect_vector(eff, xi_buf.data(), rho_buf.data());
  double acc = 0.0;
  for (int k = 0; k < q; ++k) acc += bd.z(static_cast<Eigen::Index>(obs), k) * rho_buf[k];
  return acc;
}

}  // namespace

double linear_predictor(const ModelSpec& spec, const ParameterState& state, const Dataset& data,
                        std::size_t obs) {
  if (obs >= data.size()) throw ConfigError("linear_predictor: observation index out of range");
  check_dims(state, data);
  double eta = fixed_part(state, data, obs);
  std::vector<double> xi_buf;
  std::vector<double> rho_buf;
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    const EffectiveFactors eff = effective_factors(state.blocks[b], spec.mode);
    eta += random_part(eff, state.blocks[b], data.blocks[b], obs, xi_buf, rho_buf);
  }
  return eta;
}

std::vector<double> linear_predictor_all(const ModelSpec& spec, const ParameterState& state,
                                         const Dataset& data) {
  check_dims(state, data);
  const std::size_t n = data.size();
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) eta[i] = fixed_part(state, data, i);
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    const auto& bd = data.blocks[b];
    const auto& bs = state.blocks[b];
    const EffectiveFactors eff = effective_factors(bs, spec.mode);
    const int q = bd.dim();
    Eigen::MatrixXd rho(bd.num_groups(), q);
    std::vector<double> xi(static_cast<std::size_t>(q));
    std::vector<double> out(static_cast<std::size_t>(q));
    for (int g = 0; g < bd.num_groups(); ++g) {
      for (int k = 0; k < q; ++k) xi[k] = bs.xi(g, k);
      random_effect_vector(eff, xi.data(), out.data());
      for (int k = 0; k < q; ++k) rho(g, k) = out[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int g = bd.group[i];
      double acc = 0.0;
      for (int k = 0; k < q; ++k) acc += bd.z(static_cast<Eigen::Index>(i), k) * rho(g, k);
      eta[i] += acc;
    }
  }
  return eta;
}

double log_likelihood(const Family& family, double y, double eta) {
  if (std::isnan(eta)) throw NumericError("log_likelihood: linear predictor is NaN");
  switch (family.kind) {
    case FamilyKind::poisson: {
      if (family.link != Link::log) break;
      if (eta == -std::numeric_limits<double>::infinity()) return y == 0.0 ? 0.0 : kNegInf;
      if (eta == std::numeric_limits<double>::infinity()) return kNegInf;
      return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    }
    case FamilyKind::negative_binomial: {
      if (family.link != Link::log || !family.dispersion) break;
      const double s = *family.dispersion;
      if (eta == -std::numeric_limits<double>::infinity()) return y == 0.0 ? 0.0 : kNegInf;
      if (eta == std::numeric_limits<double>::infinity()) return kNegInf;
      return std::lgamma(y + s) - std::lgamma(s) - std::lgamma(y + 1.0) + s * std::log(s) + y * eta -
             (s + y) * log_add_exp(std::log(s), eta);
    }
    case FamilyKind::bernoulli: {
      if (family.link != Link::logit) break;
      if (std::isinf(eta)) return ((eta > 0.0) == (y == 1.0)) ? 0.0 : kNegInf;
      return y * eta - (std::max(eta, 0.0) + std::log1p(std::exp(-std::fabs(eta))));
    }
    case FamilyKind::gaussian: {
      if (family.link != Link::identity || !family.dispersion) break;
      const double s2 = *family.dispersion;
      const double d = y - eta;
      return -0.5 * std::log(2.0 * std::numbers::pi * s2) - d * d / (2.0 * s2);
    }
  }
  throw ConfigError("log_likelihood: unsupported family/link or missing dispersion");
}

double total_log_likelihood(const ModelSpec& spec, const ParameterState& state,
                            const Dataset& data) {
  const Family fam = family_at(spec.family, state);
  const std::vector<double> eta = linear_predictor_all(spec, state, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += log_likelihood(fam, data.y[i], eta[i]);
  return total;
}

double group_log_likelihood(const ModelSpec& spec, const ParameterState& state,
                            const Dataset& data, int block, int group) {
  check_dims(state, data);
  if (block < 0 || block >= static_cast<int>(data.blocks.size())) {
    throw ConfigError("group_log_likelihood: block out of range");
  }
  const auto& bd = data.blocks[static_cast<std::size_t>(block)];
  if (group < 0 || group >= bd.num_groups()) throw ConfigError("group_log_likelihood: group out of range");
  const Family fam = family_at(spec.family, state);
  std::vector<EffectiveFactors> eff;
  for (const auto& bs : state.blocks) eff.push_back(effective_factors(bs, spec.mode));
  std::vector<double> xi_buf;
  std::vector<double> rho_buf;
  double total = 0.0;
  for (int obs : bd.members[static_cast<std::size_t>(group)]) {
    const auto o = static_cast<std::size_t>(obs);
    double eta = fixed_part(state, data, o);
    for (std::size_t b = 0; b < data.blocks.size(); ++b) {
      eta += random_part(eff[b], state.blocks[b], data.blocks[b], o, xi_buf, rho_buf);
    }
    total += log_likelihood(fam, data.y[o], eta);
  }
  return total;
}

double likelihood_constant(const Family& family, const Dataset& data) {
  const std::size_t n = data.size();
  double c = 0.0;
  switch (family.kind) {
    case FamilyKind::poisson:
      for (std::size_t i = 0; i < n; ++i) c -= data.log_factorial[i];
      break;
    case FamilyKind::negative_binomial: {
      const double s = family.dispersion.value_or(1.0);
      const double lg_s = std::lgamma(s);
      const double s_log_s = s * std::log(s);
      for (std::size_t i = 0; i < n; ++i) {
        c += std::lgamma(data.y[i] + s) - lg_s - data.log_factorial[i] + s_log_s;
      }
      break;
    }
    case FamilyKind::bernoulli:
      break;
    case FamilyKind::gaussian: {
      const double s2 = family.dispersion.value_or(1.0);
      c = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * s2);
      break;
    }
  }
  return c;
}

}  // namespace ssvs
