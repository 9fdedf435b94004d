#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/hare.hpp"
#include "survtransport/records.hpp"
#include "survtransport/survival_core.hpp"
#include "survtransport/weighting.hpp"

namespace survtransport {

enum class EstimatorTag { OR_PH, IPSW, CW, ACW_PH, ACW_HARE, RCT_PH, RCT_HARE };

inline constexpr std::array<EstimatorTag, 7> kAllEstimators{EstimatorTag::OR_PH,  EstimatorTag::IPSW,
                                                            EstimatorTag::CW,     EstimatorTag::ACW_PH,
                                                            EstimatorTag::ACW_HARE, EstimatorTag::RCT_PH,
                                                            EstimatorTag::RCT_HARE};

std::string to_string(EstimatorTag tag);
EstimatorTag parse_estimator_tag(const std::string& name);
bool needs_external(EstimatorTag tag);
bool needs_weights(EstimatorTag tag);
bool uses_hare(EstimatorTag tag);

// Right-continuous step curve S(t) = P(T > t) evaluated at `times`.
struct SurvivalCurve {
  EstimatorTag tag = EstimatorTag::OR_PH;
  int arm = 1;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> lower;  // pointwise bootstrap interval, empty when absent
  std::vector<double> upper;

  double value_at(double t) const;
};

struct CurvePair {
  std::array<SurvivalCurve, 2> arms;  // index = arm
  std::vector<std::string> notes;     // caps, isotonization and clamp adjustments
};

struct TateEstimate {
  EstimatorTag tag = EstimatorTag::OR_PH;
  double horizon = 24.0;
  double tau = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
};

using OutcomeModel = std::variant<CoxFit, HareFit>;
enum class OutcomeKind { Cox, Hare };

struct OutcomeOptions {
  std::optional<std::vector<std::size_t>> columns;  // all when unset
  HareConfig hare;
  std::vector<std::string> covariate_names;
};

// One model per arm (index = arm), fit on the trial records of that arm.
std::array<OutcomeModel, 2> fit_outcome_models(RecordSpan trial, OutcomeKind kind, const OutcomeOptions& options);

double cumulative_hazard(const OutcomeModel& model, const Eigen::VectorXd& x, double t);

// Cumulative hazards of a fixed set of records, evaluated at arbitrary times.
class HazardPath {
 public:
  HazardPath(const OutcomeModel& model, RecordSpan records);
  HazardPath(const CoxFit& model, RecordSpan records) : HazardPath(OutcomeModel(model), records) {}

  Eigen::VectorXd at(double t) const;
  Eigen::Index size() const { return size_; }

 private:
  Eigen::Index size_ = 0;
  bool cox_ = true;
  StepFunction baseline_;
  Eigen::VectorXd risk_;
  std::vector<double> starts_;
  Eigen::MatrixXd a_, b_, cum_;  // per record x segment
};

struct EstimatorOptions {
  double horizon = 24.0;
  bool isotonize = true;     // running minimum for the weighting estimators
  double ipcw_cap = 50.0;    // cap on exp(Lambda^C)
};

// Times at which curves are reported: 0, the distinct trial event times up to
// the horizon, and the horizon.
std::vector<double> report_times(RecordSpan trial, double horizon);

CurvePair estimate_or(RecordSpan trial, RecordSpan external, const std::array<OutcomeModel, 2>& models,
                      const EstimatorOptions& options, EstimatorTag tag = EstimatorTag::OR_PH);
CurvePair estimate_rct_only(RecordSpan trial, const std::array<OutcomeModel, 2>& models,
                            const EstimatorOptions& options, EstimatorTag tag = EstimatorTag::RCT_PH);
// CW with the calibration weights, or IPSW when `ipsw` is set.
CurvePair estimate_cw(RecordSpan trial, const WeightSet& weights, const EstimatorOptions& options,
                      bool ipsw = false);
CurvePair estimate_acw(RecordSpan trial, RecordSpan external, const WeightSet& weights,
                       const std::array<OutcomeModel, 2>& models, const EstimatorOptions& options,
                       EstimatorTag tag = EstimatorTag::ACW_PH);

// Per-grid-time pieces of the augmented estimator, exposed for oracle tests.
struct AcwTrace {
  std::vector<double> grid;
  std::vector<double> num;
  std::vector<double> denom;
};
AcwTrace acw_trace(RecordSpan trial, RecordSpan external, const WeightSet& weights, const OutcomeModel& model,
                   int arm, double horizon);

TateEstimate estimate_tate(const CurvePair& curves, double horizon);

// ---------------------------------------------------------------------------
// Full pipeline and bootstrap.

struct PipelineConfig {
  std::vector<EstimatorTag> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  EstimatorOptions estimation;
  WeightingOptions weighting;
  OutcomeOptions outcome;  // columns default to the covariates observed externally
  std::vector<std::string> covariate_names;
};

struct EstimatorResult {
  EstimatorTag tag = EstimatorTag::OR_PH;
  std::optional<CurvePair> curves;
  TateEstimate tate;
  std::string failure;  // non-empty when the estimator failed
};

struct PipelineResult {
  std::vector<EstimatorResult> estimates;  // in config order
  std::optional<WeightSet> weights;
  std::array<std::optional<OutcomeModel>, 2> cox_models;
  std::array<std::optional<OutcomeModel>, 2> hare_models;
  std::vector<std::string> notes;

  const EstimatorResult* find(EstimatorTag tag) const;
};

// Fits only the nuisances the requested estimators need. Failures of a single
// estimator are recorded in its result; with `strict` they are rethrown.
PipelineResult run_estimators(RecordSpan trial, RecordSpan external, const PipelineConfig& config,
                              bool strict = false);

struct BootstrapOptions {
  int replicates = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_failure_fraction = 0.1;
  bool strict = true;  // throw when an estimator exceeds the failure fraction
};

struct BootstrapEstimator {
  EstimatorTag tag = EstimatorTag::OR_PH;
  std::vector<double> tau;  // successful replicates, in replicate order
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
  std::string failure;  // set when too many replicates failed
  // Pointwise percentile bands on the point estimate's report times.
  std::array<std::vector<double>, 2> lower, upper;
};

struct BootstrapResult {
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<BootstrapEstimator> estimators;
};

// Resamples the trial (stratified by arm) and the external sample
// independently and reruns the pipeline. `point` supplies the report times.
BootstrapResult bootstrap(RecordSpan trial, RecordSpan external, const PipelineConfig& config,
                          const PipelineResult& point, const BootstrapOptions& options);

// Copies the bootstrap summaries into the point estimates.
void attach_bootstrap(PipelineResult& point, const BootstrapResult& boot);

}  // namespace survtransport
