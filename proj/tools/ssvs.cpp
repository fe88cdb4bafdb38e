#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssvs/error.hpp"
#include "ssvs/io.hpp"
#include "ssvs/ppc.hpp"
#include "ssvs/sampler.hpp"
#include "ssvs/select.hpp"
#include "ssvs/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SamplerOverrides {
  std::optional<int> chains, adapt, burn_in, kept, thin, threads;

  void add(CLI::App* app) {
    app->add_option("--chains", chains, "Number of chains");
    app->add_option("--adapt", adapt, "Adaptation scans per chain");
    app->add_option("--burn-in", burn_in, "Burn-in scans per chain");
    app->add_option("--kept", kept, "Recorded scans per chain (before thinning)");
    app->add_option("--thin", thin, "Keep every thin-th scan");
    app->add_option("--threads", threads, "Worker threads (default: SSVS_THREADS or all cores)");
  }
  void apply(ssvs::SamplerConfig& c) const {
    if (chains) c.chains = *chains;
    if (adapt) c.adapt = *adapt;
    if (burn_in) c.burn_in = *burn_in;
    if (kept) c.kept = *kept;
    if (thin) c.thin = *thin;
    if (threads) c.threads = *threads;
  }
};

void note(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

void write_diagnostics(const fs::path& out, const ssvs::Trace& trace, double threshold) {
  using ssvs::Draw;
  struct Param {
    std::string name;
    ssvs::DrawSelector select;
  };
  std::vector<Param> params;
  params.push_back({"log_posterior", [](const Draw& d) { return d.log_posterior; }});
  for (std::size_t p = 0; p < trace.layout.fixed.size(); ++p) {
    params.push_back({"beta:" + trace.layout.fixed[p], [p](const Draw& d) { return d.beta[p]; }});
  }
  for (std::size_t b = 0; b < trace.layout.blocks.size(); ++b) {
    const auto& blk = trace.layout.blocks[b];
    for (std::size_t k = 0; k < blk.effects.size(); ++k) {
      params.push_back({"lambda:" + blk.name + ":" + blk.effects[k],
                        [b, k](const Draw& d) { return d.blocks[b].lambda[k]; }});
    }
  }
  std::string csv = "parameter,rhat,ess\n";
  int flagged = 0;
  const std::size_t per_chain = trace.chains.empty() ? 0 : trace.chains.front().draws.size();
  for (const auto& prm : params) {
    if (per_chain < 4) break;
    const double rhat = ssvs::gelman_rubin(trace, prm.select);
    const double ess = per_chain * trace.chains.size() >= 8
                           ? ssvs::effective_sample_size(trace, prm.select)
                           : static_cast<double>(per_chain * trace.chains.size());
    csv += fmt::format("{},{:.4f},{:.1f}\n", prm.name, rhat, ess);
    if (!(rhat < threshold)) {
      ++flagged;
      note(fmt::format("warning: {} has R-hat {:.3f} (threshold {})", prm.name, rhat, threshold));
    }
  }
  ssvs::io::write_file_atomic(out / "diagnostics.csv", csv);
  if (flagged > 0) note(fmt::format("warning: {} parameter(s) did not reach convergence", flagged));
}

void write_reports(const fs::path& out, const ssvs::Trace& trace, std::size_t top,
                   const std::vector<double>* truth) {
  const ssvs::SelectionReport rep =
      truth ? ssvs::top_models(trace, top, *truth) : ssvs::top_models(trace, top);
  ssvs::io::write_file_atomic(out / "selection.csv", ssvs::selection_csv(rep, trace.layout));
  ssvs::io::write_file_atomic(out / "selection.txt", ssvs::selection_text(rep, trace.layout));
  ssvs::io::write_file_atomic(out / "inclusion.csv", ssvs::inclusion_csv(rep.inclusion, trace.layout));
  std::fputs(ssvs::selection_text(rep, trace.layout).c_str(), stdout);
}

std::vector<ssvs::SelectionMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<ssvs::SelectionMode> modes;
  for (const auto& n : names) modes.push_back(ssvs::parse_selection_mode(n));
  return modes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic search variable selection for generalized linear mixed models"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Base seed for all randomness");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  std::string fit_data, fit_spec, fit_out;
  bool add_squares = false;
  std::size_t fit_top = 10;
  SamplerOverrides fit_over;
  fit->add_option("--data", fit_data, "Data CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--spec", fit_spec, "Model spec JSON")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_out, "Output directory")->required();
  fit->add_option("--top", fit_top, "Models listed in the selection report");
  fit->add_flag("--add-squares", add_squares, "Compute NAME^2 columns missing from the data");
  fit_over.add(fit);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate simulated datasets from a design");
  std::string sim_design, sim_out;
  std::optional<int> sim_reps;
  sim->add_option("--design", sim_design, "Design JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--replicates", sim_reps, "Override the replicate count");

  // replicate
  auto* rep = app.add_subcommand("replicate", "Replication study (per-model selection table)");
  std::string rep_design, rep_settings, rep_out;
  std::vector<std::string> rep_modes;
  std::optional<int> rep_reps;
  std::size_t rep_top = 4;
  SamplerOverrides rep_over;
  rep->add_option("--design", rep_design, "Design JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--spec", rep_settings, "JSON with optional hyper/sampler sections")
      ->check(CLI::ExistingFile);
  rep->add_option("--mode", rep_modes, "basic, diagonal or full (repeatable)");
  rep->add_option("--replicates", rep_reps, "Override the replicate count");
  rep->add_option("--top", rep_top, "Rows in the selection table");
  rep->add_option("--out", rep_out, "Output directory")->required();
  rep_over.add(rep);

  // grid
  auto* grid = app.add_subcommand("grid", "Hyperparameter grid study");
  std::vector<std::string> grid_designs;
  std::string grid_file, grid_settings, grid_out, grid_mode = "full";
  std::optional<int> grid_reps;
  SamplerOverrides grid_over;
  grid->add_option("--design", grid_designs, "Design JSON (case 1, then optionally case 2)")
      ->required()
      ->check(CLI::ExistingFile);
  grid->add_option("--grid", grid_file, "Grid JSON with v_nu and h lists")->check(CLI::ExistingFile);
  grid->add_option("--spec", grid_settings, "JSON with optional hyper/sampler sections")
      ->check(CLI::ExistingFile);
  grid->add_option("--mode", grid_mode, "Selection mode");
  grid->add_option("--replicates", grid_reps, "Override the replicate count");
  grid->add_option("--out", grid_out, "Output directory")->required();
  grid_over.add(grid);

  // ppc
  auto* ppc = app.add_subcommand("ppc", "Posterior predictive checks from a saved trace");
  std::string ppc_trace, ppc_data, ppc_spec, ppc_out;
  int ppc_nrep = 100;
  int ppc_max = -1;
  bool ppc_marginal = false;
  bool ppc_squares = false;
  ppc->add_option("--trace", ppc_trace, "Trace directory")->required()->check(CLI::ExistingDirectory);
  ppc->add_option("--data", ppc_data, "Data CSV")->required()->check(CLI::ExistingFile);
  ppc->add_option("--spec", ppc_spec, "Model spec JSON")->required()->check(CLI::ExistingFile);
  ppc->add_option("--out", ppc_out, "Output directory")->required();
  ppc->add_option("--nrep", ppc_nrep, "Replicated datasets");
  ppc->add_option("--max-count", ppc_max, "Largest rootogram bin (default: observed maximum)");
  ppc->add_flag("--marginal", ppc_marginal, "Draw new random effects instead of reusing fitted ones");
  ppc->add_flag("--add-squares", ppc_squares, "Compute NAME^2 columns missing from the data");

  // report
  auto* report = app.add_subcommand("report", "Selection tables from a saved trace");
  std::string report_trace, report_out, report_truth;
  std::size_t report_top = 10;
  report->add_option("--trace", report_trace, "Trace directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--truth", report_truth, "JSON with a 'beta' array for the RMSE")
      ->check(CLI::ExistingFile);
  report->add_option("--top", report_top, "Models listed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      ssvs::ModelSpec spec = ssvs::io::parse_spec(fit_spec);
      fit_over.apply(spec.sampler);
      if (seed) spec.sampler.seed = *seed;
      spec.validate();
      const ssvs::Dataset data = ssvs::io::load_dataset(fit_data, spec, {add_squares});
      const fs::path out = fit_out;
      const ssvs::Trace trace = ssvs::run_chains(spec, data);
      ssvs::io::write_trace(out / "trace", trace);
      ssvs::io::write_file_atomic(out / "spec.json", ssvs::io::spec_to_json(spec).dump(2) + "\n");
      if (trace.empty()) {
        note("no draws recorded (kept = 0); reports skipped");
        return 0;
      }
      write_reports(out, trace, fit_top, nullptr);
      write_diagnostics(out, trace, spec.sampler.rhat_threshold);
      return 0;
    }

    if (*sim) {
      ssvs::SimDesign design = ssvs::io::parse_design(sim_design);
      if (seed) design.seed = *seed;
      if (sim_reps) design.replicates = *sim_reps;
      design.validate();
      const fs::path out = sim_out;
      ssvs::io::write_file_atomic(out / "design.json", ssvs::io::design_to_json(design).dump(2) + "\n");
      for (int r = 0; r < design.replicates; ++r) {
        const ssvs::SimulatedData s = ssvs::simulate_dataset(design, r);
        ssvs::io::write_file_atomic(out / fmt::format("rep{:03d}.csv", r + 1),
                                    ssvs::io::dataset_csv(s.data));
        const json truth{{"replicate", r + 1},
                         {"beta", s.truth.beta},
                         {"label", s.truth.label.key()},
                         {"clamp_events", s.truth.clamp_events},
                         {"regenerations", s.truth.regenerations}};
        ssvs::io::write_file_atomic(out / fmt::format("truth_rep{:03d}.json", r + 1),
                                    truth.dump(2) + "\n");
        if (s.truth.clamp_events > 0) {
          note(fmt::format("replicate {}: {} linear predictors clamped", r + 1, s.truth.clamp_events));
        }
      }
      ssvs::ModelSpec spec = ssvs::design_spec(design, {}, {}, ssvs::SelectionMode::ssvs_full);
      json sj = ssvs::io::spec_to_json(spec);
      ssvs::io::write_file_atomic(out / "spec.json", sj.dump(2) + "\n");
      return 0;
    }

    if (*rep) {
      ssvs::SimDesign design = ssvs::io::parse_design(rep_design);
      if (rep_reps) design.replicates = *rep_reps;
      ssvs::ReplicationConfig cfg;
      if (!rep_settings.empty()) {
        const json j = ssvs::io::read_json(rep_settings);
        cfg.hyper = ssvs::io::hyper_from_json(j);
        cfg.sampler = ssvs::io::sampler_from_json(j);
      }
      rep_over.apply(cfg.sampler);
      cfg.threads = cfg.sampler.threads;
      if (seed) {
        design.seed = *seed;
        cfg.sampler.seed = *seed;
      }
      if (!rep_modes.empty()) cfg.modes = parse_modes(rep_modes);
      const ssvs::ReplicationResult res = ssvs::run_replication(design, cfg);
      const fs::path out = rep_out;
      ssvs::TraceLayout layout;
      layout.fixed = design.column_names();
      layout.blocks.push_back({"subject", {layout.fixed.begin(), layout.fixed.begin() + design.random},
                               design.subjects});
      const ssvs::SelectionTable table = ssvs::selection_table(res.columns(), res.truth, rep_top);
      ssvs::io::write_file_atomic(out / "selection_table.csv", ssvs::selection_table_csv(table, layout));
      ssvs::io::write_file_atomic(out / "selection_table.txt", ssvs::selection_table_text(table, layout));
      ssvs::io::write_file_atomic(out / "replicates.csv", ssvs::replication_csv(res));
      std::string summary = "mode,succeeded,failed,percent_true_model,percent_random_correct,mean_rmse\n";
      for (const auto& s : res.summaries) {
        summary += fmt::format("{},{},{},{:.1f},{:.1f},{:.6f}\n", ssvs::to_string(s.mode), s.succeeded,
                               s.failed, s.percent_correct, s.percent_random_correct, s.mean_rmse);
      }
      ssvs::io::write_file_atomic(out / "summary.csv", summary);
      std::fputs(ssvs::selection_table_text(table, layout).c_str(), stdout);
      return 0;
    }

    if (*grid) {
      std::vector<ssvs::SimDesign> designs;
      for (const auto& d : grid_designs) {
        designs.push_back(ssvs::io::parse_design(d));
        if (grid_reps) designs.back().replicates = *grid_reps;
        if (seed) designs.back().seed = *seed;
      }
      ssvs::GridSpec gs;
      if (!grid_file.empty()) gs = ssvs::io::parse_grid(grid_file);
      ssvs::ReplicationConfig cfg;
      if (!grid_settings.empty()) {
        const json j = ssvs::io::read_json(grid_settings);
        cfg.hyper = ssvs::io::hyper_from_json(j);
        cfg.sampler = ssvs::io::sampler_from_json(j);
      }
      grid_over.apply(cfg.sampler);
      cfg.threads = cfg.sampler.threads;
      if (seed) cfg.sampler.seed = *seed;
      cfg.modes = {ssvs::parse_selection_mode(grid_mode)};
      const ssvs::GridResult res = ssvs::run_grid(designs, gs, cfg);
      const fs::path out = grid_out;
      ssvs::io::write_file_atomic(out / "grid.csv", ssvs::grid_csv(res.table));
      ssvs::io::write_file_atomic(out / "grid.txt", ssvs::grid_text(res.table));
      std::fputs(ssvs::grid_text(res.table).c_str(), stdout);
      return 0;
    }

    if (*ppc) {
      const ssvs::ModelSpec spec = ssvs::io::parse_spec(ppc_spec);
      const ssvs::Dataset data = ssvs::io::load_dataset(ppc_data, spec, {ppc_squares});
      const ssvs::Trace trace = ssvs::io::read_trace(ppc_trace);
      ssvs::Rng rng(seed.value_or(trace.config.seed));
      ssvs::PpcOptions opt;
      opt.n_rep = ppc_nrep;
      opt.marginal = ppc_marginal;
      const auto reps = ssvs::replicate_data(trace, spec, data, opt, rng);
      const fs::path out = ppc_out;
      if (spec.family.is_count()) {
        int max_count = ppc_max;
        if (max_count < 0) {
          double m = 0.0;
          for (double v : data.y) m = std::max(m, v);
          max_count = static_cast<int>(m);
        }
        ssvs::io::write_file_atomic(out / "rootogram.csv",
                                    ssvs::rootogram_csv(ssvs::rootogram(data.y, reps, max_count)));
      }
      const ssvs::ScatterSummary sc = ssvs::mean_sd_scatter(data.y, reps);
      ssvs::io::write_file_atomic(out / "mean_sd.csv", ssvs::scatter_csv(sc));
      if (sc.replicates.size() >= 3) {
        std::printf("observed (mean, sd) = (%.4f, %.4f); inside central 95%% of replicates: %s\n",
                    sc.observed.mean, sc.observed.sd, ssvs::in_central_cloud(sc) ? "yes" : "no");
      }
      return 0;
    }

    if (*report) {
      const ssvs::Trace trace = ssvs::io::read_trace(report_trace);
      std::vector<double> truth;
      if (!report_truth.empty()) {
        truth = ssvs::io::read_json(report_truth).at("beta").get<std::vector<double>>();
      }
      const fs::path out = report_out;
      write_reports(out, trace, report_top, report_truth.empty() ? nullptr : &truth);
      write_diagnostics(out, trace, trace.config.rhat_threshold);
      return 0;
    }
  } catch (const std::exception& e) {
    note(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
