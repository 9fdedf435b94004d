#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/emulation.hpp"
#include "survtransport/estimators.hpp"
#include "survtransport/records.hpp"
#include "survtransport/survival_core.hpp"

namespace survtransport::cli {

// ---------------------------------------------------------------------------
// CSV (comma separated, header row, UTF-8, '.' decimals, RFC 4180 quoting).

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest round-trip decimal representation; empty for NaN.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Column roles and ingestion.

struct CovariateSpec {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;  // categorical only
  std::string reference;            // level without an indicator; first level by default
  bool ordinal = false;
};

struct DataSchema {
  std::string time = "time";
  std::string event = "event";
  std::string arm = "arm";
  std::string design_weight;  // optional column
  std::vector<CovariateSpec> covariates;
  double time_scale = 1.0;  // multiplies every follow-up time

  // Model-matrix column names: the covariate itself, or "name=level" for each
  // non-reference level of a categorical covariate.
  std::vector<std::string> expanded_names() const;
  const CovariateSpec* find(const std::string& name) const;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t records = 0;
  std::size_t dropped = 0;  // rows outside the selected arm pair
  std::vector<std::string> messages;
};

struct Ingested {
  Records records;
  // One column per schema covariate: the value, or the level index for
  // categorical covariates (NaN when the source lacks the column).
  Eigen::MatrixXd raw;
  IngestReport report;
};

// Trial rows need time, event, arm and every covariate. With `arms` = {label1,
// label0} only those two arms are kept; otherwise arm must be 0 or 1.
// Errors cite the 1-based data row.
Ingested ingest_trial(const CsvTable& table, const DataSchema& schema,
                      const std::optional<std::pair<std::string, std::string>>& arms = std::nullopt);
// External rows need covariates only; covariate columns missing from the file
// are marked absent (NaN).
Ingested ingest_external(const CsvTable& table, const DataSchema& schema);

// Converts an emulated sample to external records under the schema.
Records emulated_to_records(const EmulatedSample& sample, const DataSchema& schema);

// ---------------------------------------------------------------------------
// Run configuration.

struct ExternalSummaryConfig {
  std::filesystem::path summary;
  std::string copula = "trial";  // "trial" or "independent"
  struct Override {
    std::string a, b;
    double rank_correlation = 0.0;
  };
  std::vector<Override> overrides;
  std::optional<std::size_t> m;  // defaults to the summary's sample size
};

struct RunConfig {
  std::filesystem::path config_dir;
  std::filesystem::path trial_path;
  std::optional<std::filesystem::path> external_path;
  std::optional<ExternalSummaryConfig> external_summary;
  DataSchema schema;
  std::optional<std::pair<std::string, std::string>> arms;
  std::vector<std::string> calibration;  // "x", "x^2", "x*y"; empty = first moments
  std::optional<double> known_propensity;
  double horizon = 24.0;
  std::vector<EstimatorTag> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  int bootstrap = 0;
  int threads = 1;
  std::uint64_t seed = 1;
  TimeTransform ph_transform = TimeTransform::KaplanMeier;
  HareConfig hare;
  bool isotonize = true;
  double ipcw_cap = 50.0;
  std::filesystem::path output_dir = "out";
  std::string echo;  // normalized JSON echo for the manifest
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& config_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

// Builds g(X) from expressions over expanded covariate names.
std::vector<CalibrationFunction> parse_calibration(const std::vector<std::string>& expressions,
                                                   const std::vector<std::string>& names);

// ---------------------------------------------------------------------------
// Building blocks shared by the commands.

// Trial file with both arms present.
Ingested load_trial(const RunConfig& cfg);

struct EmulationSetup {
  SummarySpec spec;  // ranges filled from the trial, proportions normalized
  CopulaSpec copula;
  std::size_t m = 0;
  std::uint64_t seed = 0;
};

EmulationSetup prepare_emulation(const ExternalSummaryConfig& src, const RunConfig& cfg, const Ingested& trial);

PipelineConfig pipeline_config(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Commands.

struct CommandLine {
  std::string command;  // diagnose-ph, emulate, transport, bootstrap
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> boot;
  std::optional<std::string> estimators;  // comma list
  std::optional<double> horizon;
  std::optional<std::string> arms;  // "label1,label0"
};

// Runs one command; returns the process exit code (0 ok, 1 config or
// validation error, 2 numerical failure) after printing errors to stderr.
int run_command(const CommandLine& cmd);

// 64-bit FNV-1a digest, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace survtransport::cli
