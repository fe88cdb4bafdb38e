#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssvs/model.hpp"
#include "ssvs/sampler.hpp"

namespace ssvs {

// An inclusion pattern: J bits, then the I bits of each block in spec order.
struct ModelLabel {
  std::vector<std::uint8_t> fixed;
  std::vector<std::vector<std::uint8_t>> blocks;

  // Canonical form, e.g. "111100|101000". Labels order by this string.
  std::string key() const;
  // "x1, x2 and z1, z3" style description using the trace names.
  std::string fixed_terms(const TraceLayout& layout) const;
  std::string random_terms(const TraceLayout& layout) const;

  bool random_equal(const ModelLabel& other) const { return blocks == other.blocks; }
  friend bool operator==(const ModelLabel& a, const ModelLabel& b) {
    return a.fixed == b.fixed && a.blocks == b.blocks;
  }
  friend bool operator<(const ModelLabel& a, const ModelLabel& b) { return a.key() < b.key(); }
};

struct ModelLabelHash {
  std::size_t operator()(const ModelLabel& m) const;
};

ModelLabel label_of(const ParameterState& state);
ModelLabel label_of(const Draw& draw);
ModelLabel parse_label(const std::string& key);

struct ModelFrequency {
  ModelLabel label;
  std::size_t count = 0;
  double percent = 0.0;
};

struct InclusionProbabilities {
  std::vector<double> fixed;
  std::vector<std::vector<double>> blocks;
};

struct SelectionReport {
  std::vector<ModelFrequency> ranked;  // descending count, ties by ascending key
  std::size_t total_draws = 0;
  std::size_t distinct_models = 0;
  InclusionProbabilities inclusion;
  ModelLabel modal;
  std::optional<double> rmse;
};

inline constexpr std::size_t kAllModels = std::numeric_limits<std::size_t>::max();

// Frequency table of sampled inclusion patterns over all kept draws.
SelectionReport top_models(const Trace& trace, std::size_t k = kAllModels);
// Same, with the fixed-effect RMSE against `truth` filled in.
SelectionReport top_models(const Trace& trace, std::size_t k, std::span<const double> truth);

InclusionProbabilities inclusion_probabilities(const Trace& trace);

// Posterior mean of the effective coefficients J_p beta_p.
std::vector<double> posterior_mean_beta(const Trace& trace);

// sqrt(mean_p (mean_beta_p - truth_p)^2)
double fixed_effect_rmse(const Trace& trace, std::span<const double> truth);

// ---------------------------------------------------------------------------
// Replication tables
// ---------------------------------------------------------------------------

// Modal labels from one selection mode over a set of replicates.
struct ModeColumn {
  std::string name;
  std::vector<ModelLabel> modal;  // one per successful replicate
};

struct SelectionTableRow {
  ModelLabel label;
  bool is_truth = false;
  std::vector<double> percent;  // one per mode column
};

struct SelectionTable {
  std::vector<std::string> modes;
  std::vector<SelectionTableRow> rows;
};

// The true model first, then the most frequent other labels (summed over
// modes, ties by key), up to `top` rows in total.
SelectionTable selection_table(const std::vector<ModeColumn>& columns, const ModelLabel& truth,
                               std::size_t top);

struct GridCellSummary {
  double percent = 0.0;
  double rmse = 0.0;
  int replicates = 0;
  int failed = 0;
};

struct GridCell {
  double v_nu = 0.0;
  double h = 0.0;
  std::optional<GridCellSummary> case1;
  std::optional<GridCellSummary> case2;
};

struct GridTable {
  std::vector<GridCell> rows;  // sorted by (v_nu, h)
  int missing = 0;             // cells with a case absent
};

// Rows sorted by (v = nu, h). Cells missing a case stay in the table and are
// counted; duplicates are an error.
GridTable grid_report(std::vector<GridCell> cells);

// ---------------------------------------------------------------------------
// Emitters
// ---------------------------------------------------------------------------

std::string selection_csv(const SelectionReport& report, const TraceLayout& layout);
std::string selection_text(const SelectionReport& report, const TraceLayout& layout);
std::string inclusion_csv(const InclusionProbabilities& inc, const TraceLayout& layout);
std::string selection_table_csv(const SelectionTable& table, const TraceLayout& layout);
std::string selection_table_text(const SelectionTable& table, const TraceLayout& layout);
std::string grid_csv(const GridTable& table);
std::string grid_text(const GridTable& table);

}  // namespace ssvs
