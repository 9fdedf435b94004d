#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/estimators.hpp"
#include "survtransport/records.hpp"

namespace survtransport {

// ---------------------------------------------------------------------------
// Published summaries of an external population.

struct CategoricalMargin {
  std::vector<std::string> levels;  // ordinal variables list levels low to high
  std::vector<double> proportions;
  bool ordinal = false;
};

struct ContinuousMargin {
  double mean = 0.0;
  double sd = 1.0;
  std::optional<double> lo;  // taken from the trial when unset
  std::optional<double> hi;
};

struct VariableSummary {
  std::string name;
  std::variant<CategoricalMargin, ContinuousMargin> margin;
  bool absent = false;  // not reported for this population

  bool is_categorical() const { return std::holds_alternative<CategoricalMargin>(margin); }
};

// What to do with category proportions that sum to less than one.
enum class ProportionPolicy { Renormalize, UnreportedLevel };

struct SummarySpec {
  std::string population;
  std::size_t m = 0;
  std::vector<VariableSummary> variables;
  ProportionPolicy policy = ProportionPolicy::Renormalize;
  std::vector<std::string> notes;  // normalization adjustments

  const VariableSummary* find(const std::string& name) const;
};

// Applies the proportion policy and checks the invariants (proportions sum to
// one, sd > 0, lo < mean < hi). Throws ValidationError naming the variable.
void normalize_summary(SummarySpec& spec);

SummarySpec summary_spec_from_json(const std::string& text);
std::string summary_spec_to_json(const SummarySpec& spec);

// Fills unset continuous ranges with the trial minimum and maximum of the
// named column.
void fill_ranges(SummarySpec& spec, const std::function<std::optional<std::pair<double, double>>(const std::string&)>&
                                        trial_range);

// ---------------------------------------------------------------------------
// Gaussian copula.

struct CopulaSpec {
  std::vector<std::string> names;
  Eigen::MatrixXd correlation;  // latent Gaussian correlation
  std::vector<std::string> notes;

  std::optional<std::size_t> index(const std::string& name) const;
};

// Nearest-by-eigenvalue-clipping PSD matrix with unit diagonal. Returns true
// when a repair was needed.
bool repair_correlation(Eigen::MatrixXd& r, double floor = 1e-8);

// Spearman rank correlations of the columns mapped to latent correlations via
// 2 sin(pi rho / 6), then repaired.
CopulaSpec estimate_copula(const Eigen::MatrixXd& data, std::vector<std::string> names);

// Sets the latent correlation between two variables so that their Spearman
// correlation equals `rank_correlation`, then repairs the matrix.
void override_copula(CopulaSpec& copula, const std::string& a, const std::string& b, double rank_correlation);

// Latent correlation entry (no rank conversion).
void set_latent_correlation(CopulaSpec& copula, const std::string& a, const std::string& b, double value);

CopulaSpec independent_copula(std::vector<std::string> names);

// ---------------------------------------------------------------------------
// Emulation.

struct EmulatedSample {
  std::vector<std::string> names;  // non-absent variables, spec order
  // Continuous values or categorical level indices (0-based), one row per draw.
  Eigen::MatrixXd values;
  std::vector<std::optional<CategoricalMargin>> categories;  // per variable

  std::string label(std::size_t row, std::size_t column) const;
};

// Beta parameters for a (mean, sd) on (lo, hi); throws ValidationError with
// the feasibility bound when sd is too large.
std::pair<double, double> shifted_beta_parameters(const std::string& name, const ContinuousMargin& margin);

EmulatedSample emulate_sample(const SummarySpec& spec, const CopulaSpec& copula, std::size_t m,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sensitivity to the copula and to emulation randomness.

struct CopulaVariant {
  std::string label;
  CopulaSpec copula;
};

struct RobustnessEntry {
  EstimatorTag tag = EstimatorTag::OR_PH;
  double max_curve_spread = 0.0;  // max over arms and times of the range across runs
  double tau_spread = 0.0;
  std::vector<double> tau;  // per run: variants outer, repeats inner
  int failures = 0;
};

struct RobustnessReport {
  int runs = 0;
  std::vector<RobustnessEntry> entries;
};

RobustnessReport emulation_robustness_report(RecordSpan trial, const SummarySpec& spec,
                                             const std::vector<CopulaVariant>& variants, int n_repeats,
                                             std::uint64_t seed, const PipelineConfig& config,
                                             const std::function<Records(const EmulatedSample&)>& to_external);

// Derived stream seed for repeat `index` of stream `stream`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace survtransport
