#include "ssvs/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <thread>

#include "ssvs/error.hpp"
#include "ssvs/reparam.hpp"
#include "ssvs/rng.hpp"
#include "ssvs/sampler.hpp"

namespace ssvs {

namespace {

constexpr int kMaxRegenerations = 100;

enum Stream : std::uint64_t { kCoefStream = 1, kCovariateStream, kEffectStream, kResponseStream };

}  // namespace

Eigen::MatrixXd paper_omega() {
  Eigen::MatrixXd om = Eigen::MatrixXd::Zero(10, 10);
  const int idx[3] = {0, 2, 5};
  const double block[3][3] = {{0.08, 0.04, 0.02}, {0.04, 0.15, 0.09}, {0.02, 0.09, 0.06}};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) om(idx[a], idx[b]) = block[a][b];
  }
  return om;
}

SimDesign SimDesign::paper_case(int case_id) {
  SimDesign d;
  d.case_id = case_id;
  d.omega = paper_omega();
  return d;
}

SimDesign SimDesign::scaled_case(int case_id) {
  SimDesign d;
  d.case_id = case_id;
  d.fixed = 6;
  d.random = 6;
  d.active_fixed = 4;
  d.replicates = 20;
  d.omega = Eigen::MatrixXd::Zero(6, 6);
  d.omega(0, 0) = 0.08;
  d.omega(0, 2) = d.omega(2, 0) = 0.04;
  d.omega(2, 2) = 0.15;
  return d;
}

void SimDesign::validate() const {
  std::vector<std::string> problems;
  if (subjects < 1) problems.push_back("subjects must be positive");
  if (per_subject < 1) problems.push_back("per_subject must be positive");
  if (fixed < 1) problems.push_back("fixed must be positive");
  if (random < 0 || random > fixed) problems.push_back("random must lie in [0, fixed]");
  if (case_id != 1 && case_id != 2) problems.push_back("case must be 1 or 2");
  if (active_fixed < 1 || active_fixed > fixed) problems.push_back("active_fixed must lie in [1, fixed]");
  if (!(effect_lo <= effect_hi)) problems.push_back("effect_lo must not exceed effect_hi");
  if (replicates < 0) problems.push_back("replicates must be nonnegative");
  if (!(eta_clamp > 0.0)) problems.push_back("eta_clamp must be positive");
  if (omega.rows() != random || omega.cols() != random) {
    problems.push_back(fmt::format("omega must be {0} x {0}", random));
  } else if (random > 0) {
    try {
      decompose_covariance(omega, 1e-10);
    } catch (const Error& e) {
      problems.push_back(std::string("omega: ") + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid simulation design:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

std::vector<std::uint8_t> SimDesign::true_fixed() const {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(fixed), 0);
  for (int p = 0; p < active_fixed; ++p) v[p] = 1;
  return v;
}

std::vector<std::uint8_t> SimDesign::true_random() const {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(random), 0);
  for (int k = 0; k < random; ++k) v[k] = omega(k, k) > 0.0 ? 1 : 0;
  return v;
}

ModelLabel SimDesign::true_label() const {
  ModelLabel m;
  m.fixed = true_fixed();
  if (random > 0) m.blocks.push_back(true_random());
  return m;
}

std::vector<std::string> SimDesign::column_names() const {
  std::vector<std::string> names = {"(Intercept)"};
  for (int p = 1; p < fixed; ++p) names.push_back("x" + std::to_string(p + 1));
  return names;
}

SimulatedData simulate_dataset(const SimDesign& design, int replicate) {
  design.validate();
  if (replicate < 0) throw ConfigError("simulate_dataset: negative replicate index");
  const std::uint64_t rep_seed = derive_seed(design.seed, static_cast<std::uint64_t>(replicate));
  const int l = design.fixed;
  const int q = design.random;
  const int n_sub = design.subjects;
  const int n_obs = n_sub * design.per_subject;

  SimulatedData out;
  auto& truth = out.truth;
  truth.omega = design.omega;
  truth.label = design.true_label();

  Rng coef_rng(derive_seed(rep_seed, kCoefStream));
  truth.beta.assign(static_cast<std::size_t>(l), 0.0);
  truth.beta[0] = design.intercept;
  for (int p = 1; p < l; ++p) {
    // drawn for every column so both cases consume the same stream
    const double u = coef_rng.uniform(design.effect_lo, design.effect_hi);
    if (p < design.active_fixed) {
      truth.beta[p] = u;
    } else {
      truth.beta[p] = design.case_id == 2 ? design.small_effect : 0.0;
    }
  }

  Dataset& data = out.data;
  data.x.resize(n_obs, l);
  Rng x_rng(derive_seed(rep_seed, kCovariateStream));
  for (int o = 0; o < n_obs; ++o) {
    data.x(o, 0) = 1.0;
    for (int p = 1; p < l; ++p) data.x(o, p) = x_rng.normal();
  }
  data.fixed_names = design.column_names();

  if (q > 0) {
    BlockData bd;
    bd.name = "subject";
    bd.effect_names.assign(data.fixed_names.begin(), data.fixed_names.begin() + q);
    bd.z = data.x.leftCols(q);
    bd.group.resize(static_cast<std::size_t>(n_obs));
    for (int o = 0; o < n_obs; ++o) bd.group[o] = o / design.per_subject;
    for (int i = 0; i < n_sub; ++i) bd.group_labels.push_back("s" + std::to_string(i + 1));
    data.blocks.push_back(std::move(bd));
  }

  const CholeskyFactors factors = q > 0 ? decompose_covariance(design.omega, 1e-10) : CholeskyFactors{};
  const std::vector<std::uint8_t> active = design.true_random();
  const EffectiveFactors eff = project_constraints(factors, active);

  for (int attempt = 0;; ++attempt) {
    if (attempt > kMaxRegenerations) {
      throw NumericError("simulate_dataset: could not generate finite responses");
    }
    const std::uint64_t salt = attempt == 0 ? 0 : static_cast<std::uint64_t>(1000 + attempt);
    Rng re_rng(derive_seed(rep_seed, kEffectStream + salt));
    Rng y_rng(derive_seed(rep_seed, kResponseStream + salt));
    truth.effects = Eigen::MatrixXd::Zero(n_sub, q);
    std::vector<double> xi(static_cast<std::size_t>(q));
    std::vector<double> rho(static_cast<std::size_t>(q));
    for (int i = 0; i < n_sub; ++i) {
      for (int k = 0; k < q; ++k) xi[k] = re_rng.normal();
      if (q > 0) random_effect_vector(eff, xi.data(), rho.data());
      for (int k = 0; k < q; ++k) truth.effects(i, k) = rho[k];
    }
    data.y.assign(static_cast<std::size_t>(n_obs), 0.0);
    truth.clamp_events = 0;
    bool ok = true;
    for (int o = 0; o < n_obs && ok; ++o) {
      double eta = 0.0;
      for (int p = 0; p < l; ++p) eta += data.x(o, p) * truth.beta[p];
      for (int k = 0; k < q; ++k) eta += data.x(o, k) * truth.effects(o / design.per_subject, k);
      if (eta > design.eta_clamp) {
        eta = design.eta_clamp;
        ++truth.clamp_events;
      }
      const double mu = std::exp(eta);
      if (!std::isfinite(mu)) {
        ok = false;
        break;
      }
      data.y[o] = y_rng.poisson(mu);
    }
    if (ok) {
      truth.regenerations = attempt;
      break;
    }
  }
  data.finalize(Family{FamilyKind::poisson, Link::log, std::nullopt});
  return out;
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&](const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &p[i], sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 1099511628211ULL;
      }
    }
  };
  feed(data.y.data(), data.y.size());
  feed(data.x.data(), static_cast<std::size_t>(data.x.size()));
  for (const auto& b : data.blocks) feed(b.z.data(), static_cast<std::size_t>(b.z.size()));
  return h;
}

ModelSpec design_spec(const SimDesign& design, const Hyperparameters& hyper,
                      const SamplerConfig& sampler, SelectionMode mode) {
  ModelSpec spec;
  spec.family = Family{FamilyKind::poisson, Link::log, std::nullopt};
  spec.response = "y";
  spec.fixed_effects = design.column_names();
  if (design.random > 0) {
    RandomBlockSpec blk;
    blk.name = "subject";
    blk.group_column = "subject";
    blk.effects.assign(spec.fixed_effects.begin(), spec.fixed_effects.begin() + design.random);
    spec.random_blocks.push_back(std::move(blk));
  }
  spec.hyper = hyper;
  spec.sampler = sampler;
  spec.mode = mode;
  return spec;
}

// ---------------------------------------------------------------------------
// Replication
// ---------------------------------------------------------------------------

const ModeSummary& ReplicationResult::summary(SelectionMode mode) const {
  for (const auto& s : summaries) {
    if (s.mode == mode) return s;
  }
  throw ConfigError(fmt::format("replication has no results for mode {}", to_string(mode)));
}

std::vector<ModeColumn> ReplicationResult::columns() const {
  std::vector<ModeColumn> cols;
  for (const auto& s : summaries) {
    ModeColumn c;
    c.name = std::string(to_string(s.mode));
    for (const auto& r : rows) {
      if (r.mode == s.mode && !r.failed) c.modal.push_back(r.modal);
    }
    cols.push_back(std::move(c));
  }
  return cols;
}

std::vector<ModeSummary> summarize(const std::vector<ReplicateOutcome>& rows,
                                   const std::vector<SelectionMode>& modes) {
  std::vector<ModeSummary> out;
  for (SelectionMode mode : modes) {
    ModeSummary s;
    s.mode = mode;
    int correct = 0;
    int random_correct = 0;
    double rmse = 0.0;
    for (const auto& r : rows) {
      if (r.mode != mode) continue;
      if (r.failed) {
        ++s.failed;
        continue;
      }
      ++s.succeeded;
      correct += r.correct ? 1 : 0;
      random_correct += r.random_correct ? 1 : 0;
      rmse += r.rmse;
    }
    if (s.succeeded > 0) {
      s.percent_correct = 100.0 * correct / s.succeeded;
      s.percent_random_correct = 100.0 * random_correct / s.succeeded;
      s.mean_rmse = rmse / s.succeeded;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

std::vector<ReplicateOutcome> fit_replicate(const SimDesign& design, const ReplicationConfig& config,
                                            int replicate) {
  std::vector<ReplicateOutcome> out;
  SimulatedData sim;
  std::string sim_error;
  try {
    sim = simulate_dataset(design, replicate);
  } catch (const std::exception& e) {
    sim_error = e.what();
  }
  const ModelLabel truth = design.true_label();
  for (SelectionMode mode : config.modes) {
    ReplicateOutcome r;
    r.replicate = replicate;
    r.mode = mode;
    if (!sim_error.empty()) {
      r.failed = true;
      r.error = sim_error;
      out.push_back(std::move(r));
      continue;
    }
    r.data_hash = dataset_hash(sim.data);
    r.true_beta = sim.truth.beta;
    r.clamp_events = sim.truth.clamp_events;
    SamplerConfig sc = config.sampler;
    sc.threads = 1;
    // every replicate/mode pair gets its own chain seeds
    sc.seed = derive_seed(config.sampler.seed,
                          static_cast<std::uint64_t>(replicate) * 8 + static_cast<std::uint64_t>(mode));
    try {
      const ModelSpec spec = design_spec(design, config.hyper, sc, mode);
      const Trace trace = run_chains(spec, sim.data, sc);
      const SelectionReport rep = top_models(trace, 1, sim.truth.beta);
      r.modal = rep.modal;
      r.correct = rep.modal == truth;
      r.random_correct = rep.modal.random_equal(truth);
      r.rmse = rep.rmse.value_or(0.0);
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

ReplicationResult run_replication(const SimDesign& design, const ReplicationConfig& config) {
  design.validate();
  config.hyper.validate();
  config.sampler.validate();
  if (config.modes.empty()) throw ConfigError("run_replication: no selection modes requested");

  ReplicationResult result;
  result.truth = design.true_label();
  const int n = design.replicates;
  std::vector<std::vector<ReplicateOutcome>> per(static_cast<std::size_t>(n));
  const int threads =
      std::max(1, std::min(config.threads > 0 ? config.threads : default_thread_count(), n));
  auto work = [&](int worker) {
    for (int rep = worker; rep < n; rep += threads) per[rep] = fit_replicate(design, config, rep);
  };
  if (n > 0) {
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
  }
  for (auto& v : per) {
    for (auto& r : v) result.rows.push_back(std::move(r));
  }
  result.summaries = summarize(result.rows, config.modes);
  return result;
}

GridResult run_grid(const std::vector<SimDesign>& designs, const GridSpec& grid,
                    const ReplicationConfig& config) {
  if (designs.empty() || designs.size() > 2) {
    throw ConfigError("run_grid: expected one or two designs (case 1, case 2)");
  }
  if (grid.v_nu.empty() || grid.h.empty()) throw ConfigError("run_grid: empty grid");
  if (config.modes.empty()) throw ConfigError("run_grid: no selection mode");
  ReplicationConfig cell_cfg = config;
  cell_cfg.modes = {config.modes.front()};

  GridResult out;
  std::vector<GridCell> cells;
  for (double vn : grid.v_nu) {
    for (double h : grid.h) {
      GridCellRun run;
      run.v_nu = vn;
      run.h = h;
      cell_cfg.hyper.v = vn;
      cell_cfg.hyper.nu = vn;
      cell_cfg.hyper.h = h;
      GridCell cell;
      cell.v_nu = vn;
      cell.h = h;
      for (const auto& design : designs) {
        ReplicationResult rr = run_replication(design, cell_cfg);
        const ModeSummary& s = rr.summaries.front();
        GridCellSummary summary;
        summary.percent = s.percent_correct;
        summary.rmse = s.mean_rmse;
        summary.replicates = s.succeeded;
        summary.failed = s.failed;
        if (s.succeeded > 0) {
          (design.case_id == 1 ? cell.case1 : cell.case2) = summary;
        }
        run.cases.push_back(std::move(rr));
      }
      out.cells.push_back(std::move(run));
      cells.push_back(cell);
    }
  }
  out.table = grid_report(std::move(cells));
  return out;
}

std::string replication_csv(const ReplicationResult& result) {
  std::string out = "replicate,mode,failed,label,correct,random_correct,rmse,clamp_events,data_hash,error\n";
  for (const auto& r : result.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += fmt::format("{},{},{},{},{},{},{},{},{:016x},{}\n", r.replicate + 1, to_string(r.mode),
                       r.failed ? 1 : 0, r.failed ? "" : r.modal.key(), r.correct ? 1 : 0,
                       r.random_correct ? 1 : 0, r.failed ? "NA" : fmt::format("{:.6f}", r.rmse),
                       r.clamp_events, r.data_hash, err);
  }
  return out;
}

}  // namespace ssvs
