#include "ssvs/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "ssvs/error.hpp"

namespace ssvs::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kIntercept = "(Intercept)";

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

// Strict object reader: records every key it consumes so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& problems)
      : j_(j), path_(std::move(path)), problems_(problems) {
    if (!j.is_object()) problems_.push_back(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      problems_.push_back(fmt::format("{}.{}: {}", path_, key, e.what()));
    }
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }
  const json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) problems_.push_back(fmt::format("{}: unknown key '{}'", path_, k));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> used_;
};

void throw_problems(const std::vector<std::string>& problems, const char* what) {
  if (problems.empty()) return;
  std::string msg = what;
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ParseError(msg);
}

json widths_json(const SliceWidths& w) {
  return json{{"beta", w.beta},           {"log_phi", w.log_phi},     {"lambda", w.lambda},
              {"r", w.r},                 {"xi", w.xi},               {"log_kappa", w.log_kappa},
              {"log_m", w.log_m},         {"log_dispersion", w.log_dispersion}};
}

json sampler_json(const SamplerConfig& s) {
  return json{{"chains", s.chains},
              {"adapt", s.adapt},
              {"burn_in", s.burn_in},
              {"kept", s.kept},
              {"thin", s.thin},
              {"seed", s.seed},
              {"widths", widths_json(s.widths)},
              {"max_step_outs", s.max_step_outs},
              {"recompute_period", s.recompute_period},
              {"init", s.init == InitMode::warm ? "warm" : "prior"},
              {"freeze_fixed_latents", s.freeze_fixed_latents},
              {"freeze_dispersion", s.freeze_dispersion},
              {"check_constraints", s.check_constraints},
              {"rhat_threshold", s.rhat_threshold},
              {"threads", s.threads}};
}

SamplerConfig sampler_from(const json& j, const std::string& path, std::vector<std::string>& problems) {
  SamplerConfig s;
  Reader r(j, path, problems);
  r.get("chains", s.chains);
  r.get("adapt", s.adapt);
  r.get("burn_in", s.burn_in);
  r.get("kept", s.kept);
  r.get("thin", s.thin);
  r.get("seed", s.seed);
  r.get("max_step_outs", s.max_step_outs);
  r.get("recompute_period", s.recompute_period);
  r.get("freeze_fixed_latents", s.freeze_fixed_latents);
  r.get("freeze_dispersion", s.freeze_dispersion);
  r.get("check_constraints", s.check_constraints);
  r.get("rhat_threshold", s.rhat_threshold);
  r.get("threads", s.threads);
  std::string init = "prior";
  r.get("init", init);
  if (init == "warm") {
    s.init = InitMode::warm;
  } else if (init != "prior") {
    problems.push_back(path + ".init: expected 'prior' or 'warm'");
  }
  if (r.has("widths")) {
    Reader w(r.at("widths"), path + ".widths", problems);
    w.get("beta", s.widths.beta);
    w.get("log_phi", s.widths.log_phi);
    w.get("lambda", s.widths.lambda);
    w.get("r", s.widths.r);
    w.get("xi", s.widths.xi);
    w.get("log_kappa", s.widths.log_kappa);
    w.get("log_m", s.widths.log_m);
    w.get("log_dispersion", s.widths.log_dispersion);
    w.finish();
  }
  r.finish();
  return s;
}

Hyperparameters hyper_from(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Hyperparameters hp;
  Reader h(j, path, problems);
  h.get("h", hp.h);
  h.get("v", hp.v);
  h.get("nu", hp.nu);
  h.get("g_shrink", hp.g_shrink);
  h.get("inclusion_prob", hp.inclusion_prob);
  h.get("r_mean", hp.r_mean);
  h.get("r_var", hp.r_var);
  std::string xs = "variance";
  h.get("xi_scale", xs);
  if (xs == "sd") {
    hp.xi_scale_is_variance = false;
  } else if (xs != "variance") {
    problems.push_back(path + ".xi_scale: expected 'variance' or 'sd'");
  }
  h.finish();
  return hp;
}

json layout_json(const TraceLayout& layout) {
  json blocks = json::array();
  for (const auto& b : layout.blocks) {
    blocks.push_back({{"name", b.name}, {"effects", b.effects}, {"groups", b.groups}});
  }
  return json{{"family", std::string(to_string(layout.family))},
              {"fixed", layout.fixed},
              {"blocks", blocks}};
}

TraceLayout layout_from(const json& j) {
  TraceLayout t;
  t.family = parse_family_kind(j.at("family").get<std::string>());
  t.fixed = j.at("fixed").get<std::vector<std::string>>();
  for (const auto& b : j.at("blocks")) {
    TraceLayout::Block blk;
    blk.name = b.at("name").get<std::string>();
    blk.effects = b.at("effects").get<std::vector<std::string>>();
    blk.groups = b.at("groups").get<int>();
    t.blocks.push_back(std::move(blk));
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += fmt::format(".tmp{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ParseError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ParseError("cannot move output into place at '" + path.string() + "'");
  }
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
      ++line;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError(fmt::format("{}: unterminated quoted field near line {}", source, line));
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError(source + ": empty file (no header row)");
  CsvTable t;
  t.header = std::move(records.front());
  for (auto& h : t.header) {
    while (!h.empty() && (h.back() == ' ' || h.back() == '\t')) h.pop_back();
    while (!h.empty() && (h.front() == ' ' || h.front() == '\t')) h.erase(h.begin());
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw ParseError(fmt::format("{}: row {} has {} fields, header has {}", source, r + 1,
                                   records[r].size(), t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Dataset dataset_from_csv(const CsvTable& table, const ModelSpec& spec, const LoadOptions& options,
                         const std::string& source) {
  const std::size_t n = table.rows.size();
  if (n == 0) throw ParseError(source + ": no data rows");
  std::map<std::string, std::vector<double>> cache;

  auto numeric = [&](const std::string& name) -> const std::vector<double>& {
    if (auto it = cache.find(name); it != cache.end()) return it->second;
    std::vector<double> v(n);
    if (name == kIntercept && table.column(name) < 0) {
      std::fill(v.begin(), v.end(), 1.0);
      return cache.emplace(name, std::move(v)).first->second;
    }
    const int col = table.column(name);
    if (col < 0) {
      const bool square = name.size() > 2 && name.compare(name.size() - 2, 2, "^2") == 0;
      if (options.add_squares && square) {
        const std::string base = name.substr(0, name.size() - 2);
        if (table.column(base) >= 0) {
          std::vector<double> b;
          {
            const int bc = table.column(base);
            b.resize(n);
            for (std::size_t r = 0; r < n; ++r) {
              if (!parse_double(table.rows[r][bc], b[r])) {
                throw ParseError(fmt::format("{}: row {}, column '{}': '{}' is not a number", source,
                                             r + 2, base, table.rows[r][bc]));
              }
            }
          }
          for (std::size_t r = 0; r < n; ++r) v[r] = b[r] * b[r];
          return cache.emplace(name, std::move(v)).first->second;
        }
      }
      throw ParseError(fmt::format("{}: missing column '{}'", source, name));
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (!parse_double(table.rows[r][col], v[r])) {
        throw ParseError(fmt::format("{}: row {}, column '{}': '{}' is not a number", source, r + 2,
                                     name, table.rows[r][col]));
      }
    }
    return cache.emplace(name, std::move(v)).first->second;
  };

  Dataset d;
  d.y = numeric(spec.response);
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.fixed_effects.size()));
  for (std::size_t p = 0; p < spec.fixed_effects.size(); ++p) {
    const auto& col = numeric(spec.fixed_effects[p]);
    for (std::size_t r = 0; r < n; ++r) d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = col[r];
  }
  d.fixed_names = spec.fixed_effects;
  for (const auto& blk : spec.random_blocks) {
    BlockData bd;
    bd.name = blk.name;
    bd.effect_names = blk.effects;
    bd.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(blk.effects.size()));
    for (std::size_t k = 0; k < blk.effects.size(); ++k) {
      const auto& col = numeric(blk.effects[k]);
      for (std::size_t r = 0; r < n; ++r) bd.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[r];
    }
    const int gc = table.column(blk.group_column);
    if (gc < 0) throw ParseError(fmt::format("{}: missing group column '{}'", source, blk.group_column));
    std::map<std::string, int> index;
    bd.group.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& label = table.rows[r][gc];
      if (label.empty()) {
        throw ParseError(fmt::format("{}: row {}, column '{}': empty group label", source, r + 2,
                                     blk.group_column));
      }
      auto [it, inserted] = index.emplace(label, static_cast<int>(bd.group_labels.size()));
      if (inserted) bd.group_labels.push_back(label);
      bd.group[r] = it->second;
    }
    d.blocks.push_back(std::move(bd));
  }
  if (spec.offset) {
    d.offset = numeric(*spec.offset);
    d.has_offset = true;
  }
  try {
    d.finalize(spec.family);
  } catch (const ConfigError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return d;
}

Dataset load_dataset(const fs::path& path, const ModelSpec& spec, const LoadOptions& options) {
  const std::string text = read_file(path);
  return dataset_from_csv(parse_csv(text, path.string()), spec, options, path.string());
}

std::string dataset_csv(const Dataset& data, const std::string& response) {
  std::vector<std::string> names;
  std::vector<const double*> cols;
  std::set<std::string> seen;
  names.push_back(response);
  seen.insert(response);
  for (int p = 0; p < data.num_fixed(); ++p) {
    const std::string name = p < static_cast<int>(data.fixed_names.size()) ? data.fixed_names[p]
                                                                          : "x" + std::to_string(p + 1);
    if (name == kIntercept || !seen.insert(name).second) continue;
    names.push_back(name);
    cols.push_back(data.x.col(p).data());
  }
  std::vector<std::pair<std::string, const double*>> zcols;
  for (const auto& b : data.blocks) {
    for (int k = 0; k < b.dim(); ++k) {
      const std::string name = k < static_cast<int>(b.effect_names.size()) ? b.effect_names[k]
                                                                           : b.name + "_z" + std::to_string(k + 1);
      if (name == kIntercept || !seen.insert(name).second) continue;
      names.push_back(name);
      cols.push_back(b.z.col(k).data());
    }
  }
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + csv_field(names[i]);
  for (const auto& b : data.blocks) out += "," + csv_field(b.name);
  if (data.has_offset) out += ",offset";
  out += "\n";
  for (std::size_t o = 0; o < data.size(); ++o) {
    out += num(data.y[o]);
    for (const double* c : cols) out += "," + num(c[o]);
    for (const auto& b : data.blocks) out += "," + csv_field(b.group_labels[b.group[o]]);
    if (data.has_offset) out += "," + num(data.offset[o]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

ModelSpec spec_from_json(const json& j) {
  std::vector<std::string> problems;
  ModelSpec spec;
  Reader r(j, "spec", problems);

  std::string family = "poisson";
  r.get("family", family);
  try {
    spec.family.kind = parse_family_kind(family);
    spec.family.link = canonical_link(spec.family.kind);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (r.has("link")) {
    std::string link;
    r.get("link", link);
    try {
      spec.family.link = parse_link(link);
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  if (spec.family.needs_dispersion()) spec.family.dispersion = 1.0;
  if (r.has("dispersion")) {
    double disp = 1.0;
    r.get("dispersion", disp);
    spec.family.dispersion = disp;
  }
  r.get("response", spec.response);
  r.get("fixed_effects", spec.fixed_effects);
  if (r.has("random_blocks")) {
    const json& blocks = r.at("random_blocks");
    if (!blocks.is_array()) {
      problems.push_back("spec.random_blocks: expected an array");
    } else {
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        RandomBlockSpec blk;
        Reader br(blocks[b], fmt::format("spec.random_blocks[{}]", b), problems);
        br.get("group", blk.group_column);
        blk.name = blk.group_column;
        br.get("name", blk.name);
        br.get("effects", blk.effects);
        br.finish();
        spec.random_blocks.push_back(std::move(blk));
      }
    }
  }
  if (r.has("offset")) {
    std::string off;
    r.get("offset", off);
    spec.offset = off;
  }
  std::string mode = "full";
  r.get("mode", mode);
  try {
    spec.mode = parse_selection_mode(mode);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (r.has("hyper")) spec.hyper = hyper_from(r.at("hyper"), "spec.hyper", problems);
  if (r.has("sampler")) spec.sampler = sampler_from(r.at("sampler"), "spec.sampler", problems);
  r.finish();
  throw_problems(problems, "invalid model spec:");
  spec.validate();
  return spec;
}

Hyperparameters hyper_from_json(const json& j) {
  std::vector<std::string> problems;
  Hyperparameters hp;
  if (j.is_object() && j.contains("hyper")) hp = hyper_from(j.at("hyper"), "hyper", problems);
  throw_problems(problems, "invalid hyperparameters:");
  try {
    hp.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return hp;
}

SamplerConfig sampler_from_json(const json& j) {
  std::vector<std::string> problems;
  SamplerConfig sc;
  if (j.is_object() && j.contains("sampler")) sc = sampler_from(j.at("sampler"), "sampler", problems);
  throw_problems(problems, "invalid sampler settings:");
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return sc;
}

json spec_to_json(const ModelSpec& spec) {
  json blocks = json::array();
  for (const auto& b : spec.random_blocks) {
    blocks.push_back({{"name", b.name}, {"group", b.group_column}, {"effects", b.effects}});
  }
  json j{{"family", std::string(to_string(spec.family.kind))},
         {"link", std::string(to_string(spec.family.link))},
         {"response", spec.response},
         {"fixed_effects", spec.fixed_effects},
         {"random_blocks", blocks},
         {"mode", std::string(to_string(spec.mode))},
         {"hyper",
          {{"h", spec.hyper.h},
           {"v", spec.hyper.v},
           {"nu", spec.hyper.nu},
           {"g_shrink", spec.hyper.g_shrink},
           {"inclusion_prob", spec.hyper.inclusion_prob},
           {"r_mean", spec.hyper.r_mean},
           {"r_var", spec.hyper.r_var},
           {"xi_scale", spec.hyper.xi_scale_is_variance ? "variance" : "sd"}}},
         {"sampler", sampler_json(spec.sampler)}};
  if (spec.family.dispersion) j["dispersion"] = *spec.family.dispersion;
  if (spec.offset) j["offset"] = *spec.offset;
  return j;
}

ModelSpec parse_spec_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("spec: ") + e.what());
  }
  return spec_from_json(j);
}

ModelSpec parse_spec(const fs::path& path) {
  try {
    return spec_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Designs and grids
// ---------------------------------------------------------------------------

SimDesign design_from_json(const json& j) {
  std::vector<std::string> problems;
  Reader r(j, "design", problems);
  int case_id = 1;
  r.get("case", case_id);
  std::string preset = "scaled";
  r.get("preset", preset);
  SimDesign d;
  if (preset == "paper") {
    d = SimDesign::paper_case(case_id);
  } else if (preset == "scaled") {
    d = SimDesign::scaled_case(case_id);
  } else {
    problems.push_back("design.preset: expected 'paper' or 'scaled'");
  }
  d.case_id = case_id;
  r.get("subjects", d.subjects);
  r.get("per_subject", d.per_subject);
  r.get("fixed", d.fixed);
  r.get("random", d.random);
  r.get("active_fixed", d.active_fixed);
  r.get("intercept", d.intercept);
  r.get("effect_lo", d.effect_lo);
  r.get("effect_hi", d.effect_hi);
  r.get("small_effect", d.small_effect);
  r.get("replicates", d.replicates);
  r.get("seed", d.seed);
  r.get("eta_clamp", d.eta_clamp);
  if (r.has("omega")) {
    std::vector<std::vector<double>> om;
    r.get("omega", om);
    d.omega.resize(static_cast<Eigen::Index>(om.size()), static_cast<Eigen::Index>(om.size()));
    for (std::size_t a = 0; a < om.size(); ++a) {
      if (om[a].size() != om.size()) {
        problems.push_back("design.omega: matrix must be square");
        break;
      }
      for (std::size_t b = 0; b < om.size(); ++b) d.omega(a, b) = om[a][b];
    }
  }
  r.finish();
  throw_problems(problems, "invalid design:");
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return d;
}

json design_to_json(const SimDesign& d) {
  std::vector<std::vector<double>> om(static_cast<std::size_t>(d.omega.rows()));
  for (Eigen::Index a = 0; a < d.omega.rows(); ++a) {
    for (Eigen::Index b = 0; b < d.omega.cols(); ++b) om[a].push_back(d.omega(a, b));
  }
  return json{{"case", d.case_id},          {"subjects", d.subjects},
              {"per_subject", d.per_subject}, {"fixed", d.fixed},
              {"random", d.random},         {"active_fixed", d.active_fixed},
              {"intercept", d.intercept},   {"effect_lo", d.effect_lo},
              {"effect_hi", d.effect_hi},   {"small_effect", d.small_effect},
              {"replicates", d.replicates}, {"seed", d.seed},
              {"eta_clamp", d.eta_clamp},   {"omega", om}};
}

SimDesign parse_design(const fs::path& path) {
  try {
    return design_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

GridSpec grid_from_json(const json& j) {
  std::vector<std::string> problems;
  GridSpec g;
  Reader r(j, "grid", problems);
  r.get("v_nu", g.v_nu);
  r.get("h", g.h);
  r.finish();
  if (g.v_nu.empty() || g.h.empty()) problems.push_back("grid: v_nu and h must be nonempty");
  for (double x : g.v_nu) {
    if (!(x > 0.0)) problems.push_back("grid.v_nu: values must be > 0");
  }
  for (double x : g.h) {
    if (!(x > 0.0)) problems.push_back("grid.h: values must be > 0");
  }
  throw_problems(problems, "invalid grid:");
  return g;
}

GridSpec parse_grid(const fs::path& path) {
  try {
    return grid_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

std::vector<std::string> trace_columns(const TraceLayout& layout) {
  std::vector<std::string> c = {"iteration", "log_posterior"};
  for (const auto& f : layout.fixed) c.push_back("beta:" + f);
  for (const auto& f : layout.fixed) c.push_back("J:" + f);
  for (const auto& b : layout.blocks) {
    for (const auto& e : b.effects) c.push_back("lambda:" + b.name + ":" + e);
    for (const auto& e : b.effects) c.push_back("I:" + b.name + ":" + e);
    const std::size_t q = b.effects.size();
    for (std::size_t u = 0; u < q; ++u) {
      for (std::size_t v = 0; v <= u; ++v) c.push_back(fmt::format("omega:{}:{}:{}", b.name, u + 1, v + 1));
    }
    for (int g = 0; g < b.groups; ++g) {
      for (const auto& e : b.effects) c.push_back(fmt::format("rho:{}:{}:{}", b.name, g + 1, e));
    }
  }
  if (layout.family == FamilyKind::negative_binomial) c.push_back("dispersion");
  if (layout.family == FamilyKind::gaussian) c.push_back("sigma2");
  return c;
}

std::string chain_csv(const ChainTrace& chain, const TraceLayout& layout) {
  const auto cols = trace_columns(layout);
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_field(cols[i]);
  out += "\n";
  for (const auto& d : chain.draws) {
    std::string line = fmt::format("{},{}", d.iteration, num(d.log_posterior));
    for (double b : d.beta) line += "," + num(b);
    for (auto j : d.fixed_included) line += j ? ",1" : ",0";
    for (const auto& b : d.blocks) {
      for (double l : b.lambda) line += "," + num(l);
      for (auto i : b.included) line += i ? ",1" : ",0";
      for (Eigen::Index u = 0; u < b.omega.rows(); ++u) {
        for (Eigen::Index v = 0; v <= u; ++v) line += "," + num(b.omega(u, v));
      }
      for (Eigen::Index g = 0; g < b.effects.rows(); ++g) {
        for (Eigen::Index k = 0; k < b.effects.cols(); ++k) line += "," + num(b.effects(g, k));
      }
    }
    if (layout.family == FamilyKind::negative_binomial) line += "," + num(d.dispersion);
    if (layout.family == FamilyKind::gaussian) line += "," + num(d.sigma2);
    out += line + "\n";
  }
  return out;
}

ChainTrace chain_from_csv(const CsvTable& table, const TraceLayout& layout,
                          const std::string& source) {
  const auto cols = trace_columns(layout);
  if (table.header != cols) {
    throw ParseError(source + ": trace columns do not match the trace metadata");
  }
  ChainTrace chain;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::size_t c = 0;
    auto next = [&]() {
      double v = 0.0;
      if (!parse_double(row[c], v)) {
        throw ParseError(fmt::format("{}: row {}, column '{}': '{}' is not a number", source, r + 2,
                                     cols[c], row[c]));
      }
      ++c;
      return v;
    };
    Draw d;
    d.iteration = static_cast<long>(next());
    d.log_posterior = next();
    for (std::size_t p = 0; p < layout.fixed.size(); ++p) d.beta.push_back(next());
    for (std::size_t p = 0; p < layout.fixed.size(); ++p) d.fixed_included.push_back(next() != 0.0);
    for (const auto& b : layout.blocks) {
      DrawBlock db;
      const auto q = static_cast<Eigen::Index>(b.effects.size());
      for (Eigen::Index k = 0; k < q; ++k) db.lambda.push_back(next());
      for (Eigen::Index k = 0; k < q; ++k) db.included.push_back(next() != 0.0);
      db.omega.resize(q, q);
      for (Eigen::Index u = 0; u < q; ++u) {
        for (Eigen::Index v = 0; v <= u; ++v) db.omega(u, v) = db.omega(v, u) = next();
      }
      db.effects.resize(b.groups, q);
      for (int g = 0; g < b.groups; ++g) {
        for (Eigen::Index k = 0; k < q; ++k) db.effects(g, k) = next();
      }
      d.blocks.push_back(std::move(db));
    }
    if (layout.family == FamilyKind::negative_binomial) d.dispersion = next();
    if (layout.family == FamilyKind::gaussian) d.sigma2 = next();
    chain.draws.push_back(std::move(d));
  }
  return chain;
}

void write_trace(const fs::path& dir, const Trace& trace) {
  fs::create_directories(dir);
  json chains = json::array();
  for (std::size_t c = 0; c < trace.chains.size(); ++c) {
    const auto& ch = trace.chains[c];
    const std::string file = fmt::format("trace_chain{}.csv", c + 1);
    write_file_atomic(dir / file, chain_csv(ch, trace.layout));
    chains.push_back({{"file", file},
                      {"seed", ch.seed},
                      {"draws", ch.draws.size()},
                      {"constraint_checks", ch.constraint_checks},
                      {"slice_updates", ch.slice_stats.updates},
                      {"slice_step_outs", ch.slice_stats.step_outs},
                      {"slice_evaluations", ch.slice_stats.evaluations},
                      {"slice_cap_hits", ch.slice_stats.cap_hits}});
  }
  const json meta{{"layout", layout_json(trace.layout)},
                  {"sampler", sampler_json(trace.config)},
                  {"chains", chains}};
  write_file_atomic(dir / "trace_meta.json", meta.dump(2) + "\n");
}

Trace read_trace(const fs::path& dir) {
  const json meta = read_json(dir / "trace_meta.json");
  Trace trace;
  try {
    trace.layout = layout_from(meta.at("layout"));
    std::vector<std::string> problems;
    trace.config = sampler_from(meta.at("sampler"), "sampler", problems);
    throw_problems(problems, "invalid trace metadata:");
    for (const auto& c : meta.at("chains")) {
      const std::string file = c.at("file").get<std::string>();
      const fs::path p = dir / file;
      ChainTrace ch = chain_from_csv(parse_csv(read_file(p), p.string()), trace.layout, p.string());
      ch.seed = c.at("seed").get<std::uint64_t>();
      ch.constraint_checks = c.value("constraint_checks", 0L);
      ch.slice_stats.updates = c.value("slice_updates", 0L);
      ch.slice_stats.step_outs = c.value("slice_step_outs", 0L);
      ch.slice_stats.evaluations = c.value("slice_evaluations", 0L);
      ch.slice_stats.cap_hits = c.value("slice_cap_hits", 0L);
      trace.chains.push_back(std::move(ch));
    }
  } catch (const json::exception& e) {
    throw ParseError((dir / "trace_meta.json").string() + ": " + e.what());
  }
  return trace;
}

}  // namespace ssvs::io
