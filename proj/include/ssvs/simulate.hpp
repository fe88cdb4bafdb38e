#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "ssvs/model.hpp"
#include "ssvs/select.hpp"

namespace ssvs {

// Poisson GLMM simulation design. X_1 is the intercept, the other columns are
// iid N(0, 1); Z is the first q columns of X. beta_1 = intercept, the next
// active_fixed - 1 coefficients are Unif(effect_lo, effect_hi), the rest are 0
// (case 1) or small_effect (case 2). Random effects rho_i ~ N(0, omega).
struct SimDesign {
  int subjects = 60;
  int per_subject = 10;
  int fixed = 10;
  int random = 10;
  int case_id = 1;
  int active_fixed = 6;
  double intercept = 2.0;
  double effect_lo = -0.4;
  double effect_hi = 0.4;
  double small_effect = 0.01;
  Eigen::MatrixXd omega;
  int replicates = 100;
  std::uint64_t seed = 1;
  double eta_clamp = 30.0;

  // l = q = 10, active random {1, 3, 6}.
  static SimDesign paper_case(int case_id);
  // l = q = 6, active fixed {1..4}, active random {1, 3}.
  static SimDesign scaled_case(int case_id);

  void validate() const;
  std::vector<std::uint8_t> true_fixed() const;
  std::vector<std::uint8_t> true_random() const;
  ModelLabel true_label() const;
  std::vector<std::string> column_names() const;
};

// The 10 x 10 covariance used by the paper-scale design.
Eigen::MatrixXd paper_omega();

struct SimTruth {
  std::vector<double> beta;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd effects;  // subjects x q
  ModelLabel label;
  int clamp_events = 0;
  int regenerations = 0;
};

struct SimulatedData {
  Dataset data;
  SimTruth truth;
};

// Deterministic in (design.seed, replicate). Separate RNG streams for the
// coefficients, covariates, random effects and responses, so the two cases
// with one seed differ only through the small coefficients' effect on y.
SimulatedData simulate_dataset(const SimDesign& design, int replicate);

// FNV-1a hash over the responses and design matrices.
std::uint64_t dataset_hash(const Dataset& data);

// Spec for fitting a simulated dataset: response "y", every column as a fixed
// effect, one "subject" block over the first q columns.
ModelSpec design_spec(const SimDesign& design, const Hyperparameters& hyper,
                      const SamplerConfig& sampler, SelectionMode mode);

struct ReplicationConfig {
  std::vector<SelectionMode> modes = {SelectionMode::ssvs_diagonal, SelectionMode::ssvs_full};
  Hyperparameters hyper;
  SamplerConfig sampler;
  int threads = 0;  // replicates in flight; 0 = default_thread_count()
};

struct ReplicateOutcome {
  int replicate = 0;
  SelectionMode mode = SelectionMode::ssvs_full;
  bool failed = false;
  std::string error;
  std::uint64_t data_hash = 0;
  std::vector<double> true_beta;
  ModelLabel modal;
  bool correct = false;
  bool random_correct = false;
  double rmse = 0.0;
  int clamp_events = 0;
};

struct ModeSummary {
  SelectionMode mode = SelectionMode::ssvs_full;
  int succeeded = 0;
  int failed = 0;
  double percent_correct = 0.0;
  double percent_random_correct = 0.0;
  double mean_rmse = 0.0;
};

struct ReplicationResult {
  ModelLabel truth;
  std::vector<ReplicateOutcome> rows;  // replicate-major, modes in config order
  std::vector<ModeSummary> summaries;  // one per mode

  const ModeSummary& summary(SelectionMode mode) const;
  std::vector<ModeColumn> columns() const;
};

// Recomputes the per-mode aggregates from the rows.
std::vector<ModeSummary> summarize(const std::vector<ReplicateOutcome>& rows,
                                   const std::vector<SelectionMode>& modes);

ReplicationResult run_replication(const SimDesign& design, const ReplicationConfig& config);

struct GridSpec {
  std::vector<double> v_nu = {0.01, 1.0, 5.0};
  std::vector<double> h = {0.1, 1.0, 10.0};
};

struct GridCellRun {
  double v_nu = 0.0;
  double h = 0.0;
  std::vector<ReplicationResult> cases;  // one per design
};

struct GridResult {
  std::vector<GridCellRun> cells;
  GridTable table;
};

// Every (v = nu, h) cell refits the same datasets (shared seeds). Designs are
// Case 1 then Case 2; a missing design leaves its column NA. The mode is the
// first of config.modes.
GridResult run_grid(const std::vector<SimDesign>& designs, const GridSpec& grid,
                    const ReplicationConfig& config);

// CSV of per-replicate rows.
std::string replication_csv(const ReplicationResult& result);

}  // namespace ssvs
