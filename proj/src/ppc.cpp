#include "ssvs/ppc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "ssvs/error.hpp"
#include "ssvs/reparam.hpp"

namespace ssvs {

namespace {

double draw_response(FamilyKind kind, double eta, const Draw& d, Rng& rng) {
  switch (kind) {
    case FamilyKind::poisson:
      return rng.poisson(std::exp(eta));
    case FamilyKind::negative_binomial:
      return rng.negative_binomial(std::exp(eta), d.dispersion);
    case FamilyKind::bernoulli: {
      const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
      return rng.uniform() < p ? 1.0 : 0.0;
    }
    case FamilyKind::gaussian:
      return rng.normal(eta, std::sqrt(d.sigma2));
  }
  return 0.0;
}

bool is_count(double v) { return v >= 0.0 && v == std::floor(v) && std::isfinite(v); }

}  // namespace

std::vector<std::vector<double>> replicate_data(const Trace& trace, const ModelSpec& spec,
                                                const Dataset& data, const PpcOptions& options,
                                                Rng& rng) {
  if (options.n_rep < 0) throw ConfigError("replicate_data: n_rep must be nonnegative");
  std::vector<std::vector<double>> out;
  if (options.n_rep == 0) return out;
  if (trace.empty()) throw ConfigError("replicate_data: trace has no draws");
  const auto draws = trace.pooled();
  const std::size_t n = data.size();
  const int l = data.num_fixed();

  for (int rep = 0; rep < options.n_rep; ++rep) {
    auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(draws.size()));
    idx = std::min(idx, draws.size() - 1);
    const Draw& d = *draws[idx];
    if (static_cast<int>(d.beta.size()) != l || d.blocks.size() != data.blocks.size()) {
      throw ConfigError("replicate_data: trace does not match the dataset");
    }
    std::vector<Eigen::MatrixXd> effects;
    for (std::size_t b = 0; b < data.blocks.size(); ++b) {
      const auto& bd = data.blocks[b];
      if (!options.marginal) {
        if (d.blocks[b].effects.rows() != bd.num_groups() || d.blocks[b].effects.cols() != bd.dim()) {
          throw ConfigError("replicate_data: trace random effects do not match the dataset");
        }
        effects.push_back(d.blocks[b].effects);
        continue;
      }
      const int q = bd.dim();
      const CholeskyFactors f = decompose_covariance(d.blocks[b].omega, 1e-9);
      std::vector<std::uint8_t> active(static_cast<std::size_t>(q));
      for (int k = 0; k < q; ++k) active[k] = f.lambda[k] > 0.0 ? 1 : 0;
      const EffectiveFactors eff = project_constraints(f, active);
      Eigen::MatrixXd e(bd.num_groups(), q);
      std::vector<double> xi(static_cast<std::size_t>(q));
      std::vector<double> rho(static_cast<std::size_t>(q));
      for (int i = 0; i < bd.num_groups(); ++i) {
        for (int k = 0; k < q; ++k) xi[k] = rng.normal();
        random_effect_vector(eff, xi.data(), rho.data());
        for (int k = 0; k < q; ++k) e(i, k) = rho[k];
      }
      effects.push_back(std::move(e));
    }
    std::vector<double> y(n);
    for (std::size_t o = 0; o < n; ++o) {
      double eta = data.offset.empty() ? 0.0 : data.offset[o];
      for (int p = 0; p < l; ++p) eta += data.x(static_cast<Eigen::Index>(o), p) * d.beta[p];
      for (std::size_t b = 0; b < data.blocks.size(); ++b) {
        const auto& bd = data.blocks[b];
        const int i = bd.group[o];
        for (int k = 0; k < bd.dim(); ++k) {
          eta += bd.z(static_cast<Eigen::Index>(o), k) * effects[b](i, k);
        }
      }
      y[o] = draw_response(spec.family.kind, eta, d, rng);
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<RootogramBin> rootogram(const std::vector<double>& observed,
                                    const std::vector<std::vector<double>>& replicated,
                                    int max_count) {
  if (max_count < 0) throw ConfigError("rootogram: max_count must be nonnegative");
  const auto bins = static_cast<std::size_t>(max_count) + 2;  // last = tail
  auto tally = [&](const std::vector<double>& v, std::vector<double>& freq) {
    for (double x : v) {
      if (!is_count(x)) throw DomainError(fmt::format("rootogram: {} is not a count", x));
      const auto c = x > static_cast<double>(max_count) ? bins - 1 : static_cast<std::size_t>(x);
      freq[c] += 1.0;
    }
  };
  std::vector<double> obs(bins, 0.0);
  tally(observed, obs);
  std::vector<double> exp(bins, 0.0);
  for (const auto& rep : replicated) {
    std::vector<double> f(bins, 0.0);
    tally(rep, f);
    for (std::size_t c = 0; c < bins; ++c) exp[c] += f[c];
  }
  if (!replicated.empty()) {
    for (double& e : exp) e /= static_cast<double>(replicated.size());
  }
  std::vector<RootogramBin> out;
  const bool need_tail = obs.back() > 0.0 || exp.back() > 0.0;
  for (std::size_t c = 0; c < bins; ++c) {
    const bool tail = c + 1 == bins;
    if (tail && !need_tail) break;
    RootogramBin b;
    b.count = tail ? max_count + 1 : static_cast<int>(c);
    b.tail = tail;
    b.observed = obs[c];
    b.expected = exp[c];
    b.sqrt_observed = std::sqrt(obs[c]);
    b.sqrt_expected = std::sqrt(exp[c]);
    out.push_back(b);
  }
  return out;
}

MeanSd mean_sd(const std::vector<double>& x) {
  if (x.size() < 2) throw DomainError("mean_sd: need at least 2 values for a standard deviation");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(x.size() - 1))};
}

ScatterSummary mean_sd_scatter(const std::vector<double>& observed,
                               const std::vector<std::vector<double>>& replicated) {
  ScatterSummary s;
  s.observed = mean_sd(observed);
  for (const auto& rep : replicated) s.replicates.push_back(mean_sd(rep));
  return s;
}

bool in_central_cloud(const ScatterSummary& scatter, double level) {
  const std::size_t n = scatter.replicates.size();
  if (n < 3) throw DomainError("in_central_cloud: need at least 3 replicates");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("in_central_cloud: level must be in (0, 1)");
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& r : scatter.replicates) c += Eigen::Vector2d(r.mean, r.sd);
  c /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& r : scatter.replicates) {
    const Eigen::Vector2d d = Eigen::Vector2d(r.mean, r.sd) - c;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n - 1);
  cov.diagonal().array() += 1e-12 * (1.0 + cov.diagonal().array().abs());
  const Eigen::LDLT<Eigen::Matrix2d> ldlt(cov);
  auto dist = [&](double m, double s) {
    const Eigen::Vector2d d = Eigen::Vector2d(m, s) - c;
    return d.dot(ldlt.solve(d));
  };
  std::vector<double> ds;
  ds.reserve(n);
  for (const auto& r : scatter.replicates) ds.push_back(dist(r.mean, r.sd));
  std::sort(ds.begin(), ds.end());
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n))) - 1;
  return dist(scatter.observed.mean, scatter.observed.sd) <= ds[std::min(k, n - 1)];
}

std::string rootogram_csv(const std::vector<RootogramBin>& bins) {
  std::string out = "count,observed,expected,sqrt_observed,sqrt_expected\n";
  for (const auto& b : bins) {
    out += fmt::format("{}{},{},{:.6f},{:.6f},{:.6f}\n", b.count, b.tail ? "+" : "", b.observed,
                       b.expected, b.sqrt_observed, b.sqrt_expected);
  }
  return out;
}

std::string scatter_csv(const ScatterSummary& scatter) {
  std::string out = "replicate,mean,sd\n";
  out += fmt::format("observed,{:.10g},{:.10g}\n", scatter.observed.mean, scatter.observed.sd);
  for (std::size_t i = 0; i < scatter.replicates.size(); ++i) {
    out += fmt::format("{},{:.10g},{:.10g}\n", i + 1, scatter.replicates[i].mean,
                       scatter.replicates[i].sd);
  }
  return out;
}

}  // namespace ssvs
