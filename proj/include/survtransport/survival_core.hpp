#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/records.hpp"

namespace survtransport {

// Right-continuous step function starting at 0: value(t) is the value of the
// last jump at or before t, and `initial` before the first jump.
struct StepFunction {
  std::vector<double> times;   // strictly increasing jump times
  std::vector<double> values;  // value from times[k] onwards
  double initial = 0.0;

  double operator()(double t) const;
  // Value just before t (left limit).
  double left_limit(double t) const;
  bool empty() const { return times.empty(); }
};

struct KaplanMeierCurve {
  std::vector<double> event_times;
  std::vector<double> survival_values;
  std::vector<double> at_risk_counts;  // weight sums in the weighted variant
  std::vector<double> event_counts;

  double survival(double t) const;
  // S(t-), used for left-continuous time transforms.
  double survival_before(double t) const;
};

// Product-limit estimate over distinct event times. Weights, when given,
// replace unit counts. Records must be trial records.
KaplanMeierCurve fit_kaplan_meier(RecordSpan records,
                                  std::span<const double> weights = {});

enum class CoxResponse { Event, Censoring };

struct CoxOptions {
  std::optional<std::vector<std::size_t>> columns;  // covariates used; all when unset
  double tolerance = 1e-9;           // sup-norm of the standardized score
  int max_iterations = 50;
  std::vector<std::string> column_names;  // full covariate names, for messages
};

struct CoxFit {
  CoxResponse response = CoxResponse::Event;
  std::vector<std::size_t> columns;
  Eigen::VectorXd coefficients;
  StepFunction baseline_cumhaz;  // Breslow, referenced to x = 0
  double log_partial_likelihood = 0.0;
  Eigen::MatrixXd information;
  bool converged = false;
  int n_iterations = 0;
  std::size_t n_events = 0;
  double score_norm = 0.0;  // sup-norm of the standardized score at the fit
  std::vector<double> loglik_trace;  // partial log-likelihood per accepted iterate

  // exp(beta' x) using the fit's covariate columns of the full vector x.
  double relative_risk(const Eigen::VectorXd& x) const;
  double cumulative_hazard(const Eigen::VectorXd& x, double t) const;
};

// Newton-Raphson on the Breslow partial likelihood. A response with no
// events yields the null fit (beta = 0, empty baseline).
CoxFit fit_cox(RecordSpan records, CoxResponse response = CoxResponse::Event,
               const CoxOptions& options = {});

// exp(-Lambda0(t) exp(beta' x)).
double conditional_survival(const CoxFit& fit, const Eigen::VectorXd& x, double t);

enum class TimeTransform { KaplanMeier, Identity, Rank };

std::string to_string(TimeTransform transform);
TimeTransform parse_time_transform(const std::string& name);

struct PhTestResult {
  std::vector<std::string> covariate_labels;
  Eigen::VectorXd per_covariate_chisq;
  Eigen::VectorXd per_covariate_p;
  double global_chisq = 0.0;
  double global_p = 1.0;
  std::size_t global_df = 0;
  std::string time_transform_tag;
};

// Grambsch-Therneau test of proportional hazards from scaled Schoenfeld
// residuals, using the average-information approximation.
PhTestResult schoenfeld_ph_test(const CoxFit& fit, RecordSpan records,
                                TimeTransform transform = TimeTransform::KaplanMeier,
                                std::span<const std::string> covariate_names = {});

}  // namespace survtransport
