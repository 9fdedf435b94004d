#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/records.hpp"

namespace survtransport {

// Linear-spline hazard regression: log lambda(t | x) = sum_k beta_k B_k(t | x),
// each B_k a product of at most two factors with at most one in time.

enum class FactorKind { CovariateLinear, CovariateKnot, TimeLinear, TimeKnot };

struct HareFactor {
  FactorKind kind = FactorKind::CovariateLinear;
  std::size_t column = 0;  // covariate factors only
  double knot = 0.0;       // knot factors only: (x_j - knot)+ or (knot - t)+

  bool is_time() const { return kind == FactorKind::TimeLinear || kind == FactorKind::TimeKnot; }
  double eval_covariate(const Eigen::VectorXd& x) const;
  double eval_time(double t) const;
  friend bool operator==(const HareFactor&, const HareFactor&) = default;
};

// An empty factor list is the constant term.
struct HareTerm {
  std::vector<HareFactor> factors;

  bool is_constant() const { return factors.empty(); }
  const HareFactor* time_factor() const;
  double covariate_part(const Eigen::VectorXd& x) const;  // product of covariate factors
  double time_part(double t) const;                       // 1 when the term has no time factor
  double eval(const Eigen::VectorXd& x, double t) const { return covariate_part(x) * time_part(t); }
  std::string label(std::span<const std::string> names = {}) const;
  friend bool operator==(const HareTerm& a, const HareTerm& b);
};

struct HareBasis {
  std::vector<HareTerm> terms;

  std::size_t size() const { return terms.size(); }
  bool contains(const HareTerm& term) const;
  bool has_time_knot() const;
  bool has_covariate_time_interaction() const;  // false means proportional hazards
  std::vector<double> time_knots() const;  // sorted, distinct
  std::vector<double> covariate_knots(std::size_t column) const;
  // Segment starts 0 = s_0 < s_1 < ... ; log-hazard is a + b t on [s_l, s_{l+1}).
  std::vector<double> segment_starts() const;
};

// {constant, time-linear, linear term for each listed column}.
HareBasis hare_start_basis(std::span<const std::size_t> columns);

struct HareStep {
  std::string action;  // "start", "add", "delete"
  std::string term;
  std::size_t n_terms = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double criterion = 0.0;
};

struct HareFit {
  HareBasis basis;
  Eigen::VectorXd coefficients;
  double log_likelihood = 0.0;
  double aic = 0.0;        // -2 loglik + 2 #terms
  double criterion = 0.0;  // -2 loglik + penalty #terms, used for selection
  double penalty = 2.0;
  Eigen::MatrixXd information;  // observed information at the optimum
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;  // max |score_k| / sqrt(info_kk)
  std::size_t n_events = 0;
  std::size_t n_records = 0;
  std::vector<HareStep> selection_trace;
  std::vector<std::string> covariate_names;

  double log_hazard(const Eigen::VectorXd& x, double t) const;
  double cumulative_hazard(const Eigen::VectorXd& x, double t) const;
  // Per-segment (a, b) of the log-hazard a + b t for covariates x, aligned
  // with basis.segment_starts().
  void segment_coefficients(const Eigen::VectorXd& x, std::vector<double>& a, std::vector<double>& b) const;
};

// Integral of exp(a + b u) over [lo, hi], stable as b -> 0.
double exp_linear_integral(double a, double b, double lo, double hi);

double cumulative_hazard(const HareFit& fit, const Eigen::VectorXd& x, double t);
double conditional_survival_hare(const HareFit& fit, const Eigen::VectorXd& x, double t);

struct HareFitOptions {
  double tolerance = 1e-8;  // max scaled score
  int max_iterations = 60;
  double penalty = 2.0;     // stored criterion = -2 loglik + penalty #terms
  std::optional<Eigen::VectorXd> start;  // warm start, one value per term
};

// Full-likelihood Newton fit on a fixed basis. Throws ValidationError when the
// basis lacks the constant term or has more terms than events, and
// NumericalError on rank deficiency or non-convergence.
HareFit fit_hare_fixed_basis(RecordSpan records, const HareBasis& basis, const HareFitOptions& options = {});

// Full log-likelihood at arbitrary coefficients (used by the property tests).
double hare_log_likelihood(RecordSpan records, const HareBasis& basis, const Eigen::VectorXd& beta);

struct HareConfig {
  std::optional<std::size_t> max_terms;  // default min(12, events / 10)
  std::vector<double> covariate_knot_quantiles{0.25, 0.5, 0.75};
  std::vector<double> time_knot_quantiles{0.25, 0.5, 0.75};
  std::optional<double> penalty;                   // default log(n)
  std::optional<std::vector<std::size_t>> columns;  // covariates offered; all varying when unset
  std::vector<std::string> covariate_names;
  std::size_t min_events = 25;
};

// Stepwise addition then Wald deletion, both judged by the penalized
// likelihood criterion; returns the best model visited.
HareFit fit_hare(RecordSpan records, const HareConfig& config = {});

std::string serialize_hare(const HareFit& fit);
HareFit deserialize_hare(const std::string& text);

}  // namespace survtransport
