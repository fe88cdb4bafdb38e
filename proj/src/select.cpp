#include "ssvs/select.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

#include "ssvs/error.hpp"

namespace ssvs {

namespace {

std::string bits(const std::vector<std::uint8_t>& v) {
  std::string s;
  s.reserve(v.size());
  for (auto b : v) s.push_back(b ? '1' : '0');
  return s;
}

std::string join_names(const std::vector<std::uint8_t>& on, const std::vector<std::string>& names,
                       std::string_view prefix) {
  std::string out;
  for (std::size_t i = 0; i < on.size(); ++i) {
    if (!on[i]) continue;
    if (!out.empty()) out += ", ";
    out += i < names.size() ? names[i] : std::string(prefix) + std::to_string(i + 1);
  }
  return out.empty() ? "(none)" : out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += c + 1 == r.size() ? r[c] : pad(r[c], width[c] + 2);
    }
    out += line + "\n";
  }
  return out;
}

void require_nonempty(const Trace& trace, const char* what) {
  if (trace.empty()) throw ConfigError(std::string(what) + ": trace has no draws");
}

std::string fmt_num(double x, int digits) { return fmt::format("{:.{}f}", x, digits); }

}  // namespace

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

std::string ModelLabel::key() const {
  std::string s = bits(fixed);
  for (const auto& b : blocks) s += "|" + bits(b);
  return s;
}

std::string ModelLabel::fixed_terms(const TraceLayout& layout) const {
  return join_names(fixed, layout.fixed, "x");
}

std::string ModelLabel::random_terms(const TraceLayout& layout) const {
  std::string out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::vector<std::string> names;
    if (b < layout.blocks.size()) names = layout.blocks[b].effects;
    std::string part = join_names(blocks[b], names, "z");
    if (blocks.size() > 1 && b < layout.blocks.size()) part = layout.blocks[b].name + ": " + part;
    if (!out.empty()) out += "; ";
    out += part;
  }
  return out;
}

std::size_t ModelLabelHash::operator()(const ModelLabel& m) const {
  return std::hash<std::string>{}(m.key());
}

ModelLabel label_of(const ParameterState& state) {
  ModelLabel m;
  m.fixed = state.fixed_included;
  for (const auto& b : state.blocks) m.blocks.push_back(b.included);
  return m;
}

ModelLabel label_of(const Draw& draw) {
  ModelLabel m;
  m.fixed = draw.fixed_included;
  for (const auto& b : draw.blocks) m.blocks.push_back(b.included);
  return m;
}

ModelLabel parse_label(const std::string& key) {
  ModelLabel m;
  std::vector<std::uint8_t>* cur = &m.fixed;
  for (char c : key) {
    if (c == '|') {
      m.blocks.emplace_back();
      cur = &m.blocks.back();
    } else if (c == '0' || c == '1') {
      cur->push_back(c == '1' ? 1 : 0);
    } else {
      throw ParseError("model label: unexpected character '" + std::string(1, c) + "' in " + key);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

InclusionProbabilities inclusion_probabilities(const Trace& trace) {
  require_nonempty(trace, "inclusion_probabilities");
  const auto draws = trace.pooled();
  InclusionProbabilities inc;
  const Draw& first = *draws.front();
  std::vector<std::size_t> fixed_counts(first.fixed_included.size(), 0);
  std::vector<std::vector<std::size_t>> block_counts;
  for (const auto& b : first.blocks) block_counts.emplace_back(b.included.size(), 0);
  for (const Draw* d : draws) {
    for (std::size_t p = 0; p < fixed_counts.size(); ++p) fixed_counts[p] += d->fixed_included[p];
    for (std::size_t b = 0; b < block_counts.size(); ++b) {
      for (std::size_t k = 0; k < block_counts[b].size(); ++k) {
        block_counts[b][k] += d->blocks[b].included[k];
      }
    }
  }
  const auto n = static_cast<double>(draws.size());
  for (auto c : fixed_counts) inc.fixed.push_back(static_cast<double>(c) / n);
  for (const auto& bc : block_counts) {
    std::vector<double> v;
    for (auto c : bc) v.push_back(static_cast<double>(c) / n);
    inc.blocks.push_back(std::move(v));
  }
  return inc;
}

std::vector<double> posterior_mean_beta(const Trace& trace) {
  require_nonempty(trace, "posterior_mean_beta");
  const auto draws = trace.pooled();
  std::vector<double> mean(draws.front()->beta.size(), 0.0);
  for (const Draw* d : draws) {
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += d->beta[p];
  }
  for (double& m : mean) m /= static_cast<double>(draws.size());
  return mean;
}

double fixed_effect_rmse(const Trace& trace, std::span<const double> truth) {
  const std::vector<double> mean = posterior_mean_beta(trace);
  if (truth.size() != mean.size()) {
    throw ConfigError("fixed_effect_rmse: truth has " + std::to_string(truth.size()) +
                      " values, trace has " + std::to_string(mean.size()) + " fixed effects");
  }
  double ss = 0.0;
  for (std::size_t p = 0; p < mean.size(); ++p) ss += (mean[p] - truth[p]) * (mean[p] - truth[p]);
  return std::sqrt(ss / static_cast<double>(mean.size()));
}

SelectionReport top_models(const Trace& trace, std::size_t k) {
  require_nonempty(trace, "top_models");
  std::map<std::string, ModelFrequency> counts;
  for (const Draw* d : trace.pooled()) {
    ModelLabel label = label_of(*d);
    auto [it, inserted] = counts.try_emplace(label.key());
    if (inserted) it->second.label = std::move(label);
    ++it->second.count;
  }
  SelectionReport rep;
  rep.total_draws = trace.total_draws();
  rep.distinct_models = counts.size();
  for (auto& [key, mf] : counts) rep.ranked.push_back(std::move(mf));
  // map iteration is key-ascending, so a stable sort on count keeps that tie order
  std::stable_sort(rep.ranked.begin(), rep.ranked.end(),
                   [](const ModelFrequency& a, const ModelFrequency& b) { return a.count > b.count; });
  for (auto& mf : rep.ranked) {
    mf.percent = 100.0 * static_cast<double>(mf.count) / static_cast<double>(rep.total_draws);
  }
  rep.modal = rep.ranked.front().label;
  if (rep.ranked.size() > k) rep.ranked.resize(k);
  rep.inclusion = inclusion_probabilities(trace);
  return rep;
}

SelectionReport top_models(const Trace& trace, std::size_t k, std::span<const double> truth) {
  SelectionReport rep = top_models(trace, k);
  rep.rmse = fixed_effect_rmse(trace, truth);
  return rep;
}

SelectionTable selection_table(const std::vector<ModeColumn>& columns, const ModelLabel& truth,
                               std::size_t top) {
  SelectionTable t;
  std::map<std::string, std::size_t> totals;
  std::map<std::string, ModelLabel> labels;
  for (const auto& col : columns) {
    t.modes.push_back(col.name);
    for (const auto& m : col.modal) {
      const std::string key = m.key();
      ++totals[key];
      labels.emplace(key, m);
    }
  }
  std::vector<std::pair<std::string, std::size_t>> order(totals.begin(), totals.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  auto row_for = [&](const ModelLabel& label, bool is_truth) {
    SelectionTableRow row;
    row.label = label;
    row.is_truth = is_truth;
    const std::string key = label.key();
    for (const auto& col : columns) {
      std::size_t c = 0;
      for (const auto& m : col.modal) c += m.key() == key ? 1 : 0;
      row.percent.push_back(col.modal.empty() ? 0.0
                                              : 100.0 * static_cast<double>(c) /
                                                    static_cast<double>(col.modal.size()));
    }
    return row;
  };

  if (top == 0) return t;
  const std::string truth_key = truth.key();
  t.rows.push_back(row_for(truth, true));
  for (const auto& [key, count] : order) {
    if (t.rows.size() >= top) break;
    if (key == truth_key) continue;
    t.rows.push_back(row_for(labels.at(key), false));
  }
  return t;
}

GridTable grid_report(std::vector<GridCell> cells) {
  std::sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    return a.v_nu != b.v_nu ? a.v_nu < b.v_nu : a.h < b.h;
  });
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].v_nu == cells[i - 1].v_nu && cells[i].h == cells[i - 1].h) {
      throw ConfigError(fmt::format("grid_report: duplicate cell v=nu={}, h={}", cells[i].v_nu,
                                    cells[i].h));
    }
  }
  GridTable t;
  for (const auto& c : cells) {
    if (!c.case1 || !c.case2) ++t.missing;
  }
  t.rows = std::move(cells);
  return t;
}

// ---------------------------------------------------------------------------
// Emitters
// ---------------------------------------------------------------------------

std::string selection_csv(const SelectionReport& report, const TraceLayout& layout) {
  std::string out = "rank,label,fixed_effects,random_effects,count,percent\n";
  for (std::size_t i = 0; i < report.ranked.size(); ++i) {
    const auto& mf = report.ranked[i];
    out += fmt::format("{},{},{},{},{},{}\n", i + 1, csv_field(mf.label.key()),
                       csv_field(mf.label.fixed_terms(layout)),
                       csv_field(mf.label.random_terms(layout)), mf.count, fmt_num(mf.percent, 2));
  }
  return out;
}

std::string selection_text(const SelectionReport& report, const TraceLayout& layout) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Rank", "Fixed effects", "Random effects", "Count", "Percent"});
  for (std::size_t i = 0; i < report.ranked.size(); ++i) {
    const auto& mf = report.ranked[i];
    rows.push_back({std::to_string(i + 1), mf.label.fixed_terms(layout),
                    mf.label.random_terms(layout), std::to_string(mf.count),
                    fmt_num(mf.percent, 2)});
  }
  std::string out = aligned(rows);
  out += fmt::format("{} draws, {} distinct models\n", report.total_draws, report.distinct_models);
  if (report.rmse) out += fmt::format("Fixed-effect RMSE: {:.6f}\n", *report.rmse);
  return out;
}

std::string inclusion_csv(const InclusionProbabilities& inc, const TraceLayout& layout) {
  std::string out = "block,effect,probability\n";
  for (std::size_t p = 0; p < inc.fixed.size(); ++p) {
    const std::string name = p < layout.fixed.size() ? layout.fixed[p] : "x" + std::to_string(p + 1);
    out += fmt::format("fixed,{},{}\n", csv_field(name), fmt_num(inc.fixed[p], 4));
  }
  for (std::size_t b = 0; b < inc.blocks.size(); ++b) {
    const std::string block = b < layout.blocks.size() ? layout.blocks[b].name : "block" + std::to_string(b + 1);
    for (std::size_t k = 0; k < inc.blocks[b].size(); ++k) {
      std::string name = "z" + std::to_string(k + 1);
      if (b < layout.blocks.size() && k < layout.blocks[b].effects.size()) {
        name = layout.blocks[b].effects[k];
      }
      out += fmt::format("{},{},{}\n", csv_field(block), csv_field(name),
                         fmt_num(inc.blocks[b][k], 4));
    }
  }
  return out;
}

std::string selection_table_csv(const SelectionTable& table, const TraceLayout& layout) {
  std::string out = "label,fixed_effects,random_effects,true_model";
  for (const auto& m : table.modes) out += "," + csv_field(m);
  out += "\n";
  for (const auto& row : table.rows) {
    out += fmt::format("{},{},{},{}", csv_field(row.label.key()),
                       csv_field(row.label.fixed_terms(layout)),
                       csv_field(row.label.random_terms(layout)), row.is_truth ? 1 : 0);
    for (double p : row.percent) out += "," + fmt_num(p, 1);
    out += "\n";
  }
  return out;
}

std::string selection_table_text(const SelectionTable& table, const TraceLayout& layout) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Model", ""};
  for (const auto& m : table.modes) header.push_back(m);
  rows.push_back(header);
  for (const auto& row : table.rows) {
    std::vector<std::string> r = {row.label.fixed_terms(layout) + " and",
                                  row.label.random_terms(layout)};
    for (double p : row.percent) r.push_back(fmt_num(p, 0));
    rows.push_back(std::move(r));
  }
  return aligned(rows);
}

std::string grid_csv(const GridTable& table) {
  std::string out = "v_nu,h,case1_percent,case1_rmse,case2_percent,case2_rmse\n";
  auto cell = [](const std::optional<GridCellSummary>& s) {
    if (!s) return std::string("NA,NA");
    return fmt_num(s->percent, 1) + "," + fmt::format("{:.6f}", s->rmse);
  };
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{}\n", r.v_nu, r.h, cell(r.case1), cell(r.case2));
  }
  return out;
}

std::string grid_text(const GridTable& table) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"v = nu", "h", "Case 1 %", "Case 1 RMSE", "Case 2 %", "Case 2 RMSE"});
  for (const auto& r : table.rows) {
    std::vector<std::string> row = {fmt::format("{}", r.v_nu), fmt::format("{}", r.h)};
    for (const auto* s : {&r.case1, &r.case2}) {
      if (*s) {
        row.push_back(fmt_num((*s)->percent, 0));
        row.push_back(fmt::format("{:.6f}", (*s)->rmse));
      } else {
        row.push_back("NA");
        row.push_back("NA");
      }
    }
    rows.push_back(std::move(row));
  }
  std::string out = aligned(rows);
  if (table.missing > 0) out += fmt::format("{} cell(s) incomplete (NA)\n", table.missing);
  return out;
}

}  // namespace ssvs
