#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ssvs/model.hpp"
#include "ssvs/sampler.hpp"
#include "ssvs/simulate.hpp"

namespace ssvs::io {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  // -1 when absent
};

// RFC 4180-style: comma separated, double-quoted fields, header row required.
CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>");

struct LoadOptions {
  // Columns named "NAME^2" that are missing from the file are computed as
  // the square of NAME.
  bool add_squares = false;
};

// Builds the Dataset a spec needs. "(Intercept)" is a column of ones; group
// labels map to dense indices in order of first appearance.
Dataset dataset_from_csv(const CsvTable& table, const ModelSpec& spec, const LoadOptions& options,
                         const std::string& source = "<csv>");
Dataset load_dataset(const std::filesystem::path& path, const ModelSpec& spec,
                     const LoadOptions& options = {});

// Writes a dataset as CSV with the columns a matching spec refers to.
std::string dataset_csv(const Dataset& data, const std::string& response = "y");

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

ModelSpec spec_from_json(const nlohmann::json& j);
// The "hyper" and "sampler" sections alone (other keys are ignored).
Hyperparameters hyper_from_json(const nlohmann::json& j);
SamplerConfig sampler_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec parse_spec(const std::filesystem::path& path);
ModelSpec parse_spec_text(std::string_view text);

SimDesign design_from_json(const nlohmann::json& j);
nlohmann::json design_to_json(const SimDesign& design);
SimDesign parse_design(const std::filesystem::path& path);

GridSpec grid_from_json(const nlohmann::json& j);
GridSpec parse_grid(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

// Column names of one chain's CSV, in order.
std::vector<std::string> trace_columns(const TraceLayout& layout);
std::string chain_csv(const ChainTrace& chain, const TraceLayout& layout);
ChainTrace chain_from_csv(const CsvTable& table, const TraceLayout& layout,
                          const std::string& source = "<trace>");

// <dir>/trace_meta.json plus <dir>/trace_chain<c>.csv per chain.
void write_trace(const std::filesystem::path& dir, const Trace& trace);
Trace read_trace(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ssvs::io
