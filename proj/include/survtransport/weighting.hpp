#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/records.hpp"
#include "survtransport/survival_core.hpp"

namespace survtransport {

// ---------------------------------------------------------------------------
// Logistic regression (IRLS) shared by the propensity and sampling models.

struct LogisticFit {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::VectorXd fitted;        // unclipped probabilities
  int iterations = 0;
  double log_likelihood = 0.0;
};

// Weighted maximum likelihood of y in {0,1} on [1, x]. Throws SeparationError
// when the outcome is constant or the likelihood has no finite maximizer.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& weights = {});

// ---------------------------------------------------------------------------
// Calibration (entropy balancing).

// One calibration function g_k(X) evaluated on a full covariate vector. A NaN
// result means the function is undefined for that record.
struct CalibrationFunction {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> eval;
};

// x_j^power, NaN when x_j is missing.
CalibrationFunction moment_function(std::size_t column, std::string name, int power = 1);
// x_j * x_l.
CalibrationFunction product_function(std::size_t first, std::size_t second, std::string name);

struct CalibrationSpec {
  std::vector<CalibrationFunction> functions;
  Eigen::VectorXd target_moments;  // filled by compute_target_moments

  std::size_t size() const { return functions.size(); }
  std::vector<std::string> names() const;
};

// Rows = records, columns = g functions. Throws ValidationError naming the
// first function that is undefined on some record.
Eigen::MatrixXd evaluate_functions(const std::vector<CalibrationFunction>& functions, RecordSpan records,
                                   const std::string& sample_label);

// First moments of every covariate column that is observed for all external
// records (columns missing from the external source are skipped).
std::vector<CalibrationFunction> default_calibration_functions(RecordSpan external,
                                                               std::span<const std::string> names);

// Design-weighted mean of each g over the external sample.
Eigen::VectorXd compute_target_moments(RecordSpan external, const std::vector<CalibrationFunction>& functions);

struct CalibrationOptions {
  double tolerance = 1e-10;  // sup-norm residual on the standardized scale
  int max_iterations = 100;
};

struct CalibrationResult {
  Eigen::VectorXd weights;  // omega_i, positive, sum to 1
  Eigen::VectorXd lambda;   // dual solution on the original g scale
  Eigen::VectorXd eta;      // loglinear sampling-score coefficients, eta = -lambda
  int iterations = 0;
  double residual = 0.0;  // sup-norm of sum(omega g) - target, original scale
  double effective_sample_size = 0.0;
};

// Minimum-entropy weights matching spec.target_moments, found as the Newton
// root of the Lagrangian dual. Throws ValidationError when a target moment is
// outside the range of the trial values and NumericalError on divergence.
CalibrationResult solve_calibration(RecordSpan trial, const CalibrationSpec& spec,
                                    const CalibrationOptions& options = {});

// omega(X; eta) = exp(-eta' g(X)) / sum exp(-eta' g(X)).
Eigen::VectorXd loglinear_weights(const Eigen::MatrixXd& g, const Eigen::VectorXd& eta);

// ---------------------------------------------------------------------------
// Treatment propensity.

inline constexpr double kPropensityClip = 1e-6;

struct PropensityFit {
  Eigen::VectorXd coefficients;  // intercept first, then one per g function
  Eigen::VectorXd probabilities;  // P(A = 1 | X) per trial record, clipped
};

PropensityFit fit_propensity(RecordSpan trial, const std::vector<CalibrationFunction>& functions);
// pi_A fixed by design (e.g. 1:1 randomization).
PropensityFit known_propensity(RecordSpan trial, double probability);

// ---------------------------------------------------------------------------
// Inverse-odds-of-sampling weights.

struct IpswOptions {
  double extreme_probability = 1e-3;   // flag min P(trial | X) below this
  double unstable_probability = 1e-6;  // warn below this
};

struct IpswResult {
  Eigen::VectorXd weights;  // per trial record, normalized to sum 1
  Eigen::VectorXd coefficients;
  Eigen::VectorXd trial_probability;  // P(delta = 1 | pooled, X) per trial record
  double min_trial_probability = 1.0;
  bool extreme = false;
  std::vector<std::string> warnings;
};

IpswResult ipsw_weights(RecordSpan trial, RecordSpan external,
                        const std::vector<CalibrationFunction>& functions, const IpswOptions& options = {});

// ---------------------------------------------------------------------------
// Censoring model.

struct CensoringOptions {
  std::optional<std::vector<std::size_t>> columns;  // all covariates when unset
};

// Cox model for the censoring time in each arm (index = arm). Arms without
// censoring get the null fit, arms with too few censorings for the covariates
// get the covariate-free (Nelson-Aalen) fit; both are noted in `notes`.
std::array<CoxFit, 2> fit_censoring_models(RecordSpan trial, const CensoringOptions& options,
                                           std::vector<std::string>* notes = nullptr);

// S^C_a(t, X) = P(C > t | X, A = a).
double censoring_survival(const CoxFit& fit, const Eigen::VectorXd& x, double t);

// ---------------------------------------------------------------------------
// All nuisance weights for the weighting estimators.

struct WeightingOptions {
  std::vector<CalibrationFunction> calibration;  // empty = default functions
  std::optional<double> known_propensity;        // fitted when absent
  CensoringOptions censoring;
  bool with_ipsw = true;
  IpswOptions ipsw;
  CalibrationOptions solver;
};

struct SolverDiagnostics {
  int iterations = 0;
  double constraint_residual = 0.0;
  double effective_sample_size = 0.0;
};

struct WeightSet {
  std::vector<std::string> function_names;
  Eigen::VectorXd target_moments;
  Eigen::VectorXd calib_weights;
  Eigen::VectorXd dual_solution;  // lambda; eta = -lambda
  Eigen::VectorXd propensity;     // P(A = 1 | X) per trial record
  Eigen::VectorXd propensity_coefficients;
  std::optional<IpswResult> ipsw;
  std::array<CoxFit, 2> censoring;
  SolverDiagnostics solver_diag;
  std::vector<std::string> notes;

  // pi_hat_ai = A pi + (1 - A)(1 - pi) for trial record i.
  double arm_probability(std::size_t i, int arm) const;
};

WeightSet estimate_weights(RecordSpan trial, RecordSpan external, const WeightingOptions& options,
                           std::span<const std::string> covariate_names = {});

double censoring_survival(const WeightSet& weights, const Eigen::VectorXd& x, int arm, double t);

}  // namespace survtransport
