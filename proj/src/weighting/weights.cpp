#include <algorithm>
#include <cmath>
#include <sstream>

#include "survtransport/error.hpp"
#include "survtransport/weighting.hpp"

namespace survtransport {

PropensityFit fit_propensity(RecordSpan trial, const std::vector<CalibrationFunction>& functions) {
  if (trial.empty()) throw ValidationError("propensity: the trial sample is empty");
  const Eigen::MatrixXd g = evaluate_functions(functions, trial, "trial");
  Eigen::VectorXd a(g.rows());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = trial[static_cast<std::size_t>(i)].arm;
  if (a.minCoeff() == a.maxCoeff())
    throw SeparationError("propensity: every trial record is in arm " + std::to_string(int(a(0))) +
                          " (perfect separation)");
  const LogisticFit fit = fit_logistic(g, a);
  PropensityFit out;
  out.coefficients = fit.coefficients;
  out.probabilities = fit.fitted.array().max(kPropensityClip).min(1.0 - kPropensityClip);
  return out;
}

PropensityFit known_propensity(RecordSpan trial, double probability) {
  if (!(probability > 0.0 && probability < 1.0))
    throw ValidationError("known propensity must lie strictly between 0 and 1");
  PropensityFit out;
  out.coefficients = Eigen::VectorXd::Constant(1, std::log(probability / (1.0 - probability)));
  out.probabilities = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(trial.size()), probability);
  return out;
}

IpswResult ipsw_weights(RecordSpan trial, RecordSpan external, const std::vector<CalibrationFunction>& functions,
                        const IpswOptions& options) {
  if (trial.empty() || external.empty()) throw ValidationError("IPSW: both samples must be non-empty");
  const Eigen::MatrixXd gt = evaluate_functions(functions, trial, "trial");
  const Eigen::MatrixXd ge = evaluate_functions(functions, external, "external");
  const Eigen::Index n = gt.rows(), m = ge.rows();
  Eigen::MatrixXd pooled(n + m, gt.cols());
  pooled << gt, ge;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n + m);
  y.head(n).setOnes();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n + m);
  for (Eigen::Index i = 0; i < m; ++i) w(n + i) = external[static_cast<std::size_t>(i)].design_weight;
  const LogisticFit fit = fit_logistic(pooled, y, w);

  IpswResult out;
  out.coefficients = fit.coefficients;
  out.trial_probability = fit.fitted.head(n).array().max(kPropensityClip).min(1.0 - kPropensityClip);
  out.min_trial_probability = out.trial_probability.minCoeff();
  out.weights = (1.0 - out.trial_probability.array()) / out.trial_probability.array();
  out.weights /= out.weights.sum();
  if (out.min_trial_probability < options.extreme_probability) {
    out.extreme = true;
    std::ostringstream msg;
    msg << "IPSW: minimum P(trial | X) = " << out.min_trial_probability << " is below "
        << options.extreme_probability << "; weights are extreme";
    out.warnings.push_back(msg.str());
  }
  if (out.min_trial_probability < options.unstable_probability)
    out.warnings.push_back("IPSW: sampling probabilities hit the clipping bound; the estimate is unstable");
  return out;
}

namespace {

std::string label(std::size_t col, std::span<const std::string> names) {
  return col < names.size() ? names[col] : "x" + std::to_string(col);
}

}  // namespace

std::array<CoxFit, 2> fit_censoring_models(RecordSpan trial, const CensoringOptions& options,
                                           std::vector<std::string>* notes) {
  auto note = [&](const std::string& s) {
    if (notes) notes->push_back(s);
  };
  std::array<CoxFit, 2> out;
  for (int arm = 0; arm < 2; ++arm) {
    const Records recs = filter_arm(trial, arm);
    if (recs.empty()) throw ValidationError("censoring model: arm " + std::to_string(arm) + " has no records");
    std::vector<std::size_t> requested;
    if (options.columns) {
      requested = *options.columns;
    } else {
      requested.resize(static_cast<std::size_t>(recs.front().covariates.size()));
      for (std::size_t j = 0; j < requested.size(); ++j) requested[j] = j;
    }
    const std::vector<std::size_t> cols =
        requested.empty() ? requested : varying_columns(recs, requested);
    if (cols.size() < requested.size())
      note("censoring model arm " + std::to_string(arm) + ": dropped " +
           std::to_string(requested.size() - cols.size()) + " covariate(s) constant in the arm");
    const auto censored =
        static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [](const auto& r) { return !r.event; }));
    const std::string where = "censoring model arm " + std::to_string(arm) + ": ";
    CoxOptions opts;
    if (censored == 0) {
      note(where + "no censoring, S^C = 1");
      opts.columns = std::vector<std::size_t>{};
    } else if (censored <= cols.size()) {
      note(where + std::to_string(censored) + " censorings for " + std::to_string(cols.size()) +
           " covariates; using the covariate-free (Nelson-Aalen) fit");
      opts.columns = std::vector<std::size_t>{};
    } else {
      opts.columns = cols;
    }
    try {
      out[static_cast<std::size_t>(arm)] = fit_cox(recs, CoxResponse::Censoring, opts);
    } catch (const NumericalError& e) {
      note(where + e.what() + "; using the covariate-free (Nelson-Aalen) fit");
      opts.columns = std::vector<std::size_t>{};
      out[static_cast<std::size_t>(arm)] = fit_cox(recs, CoxResponse::Censoring, opts);
    }
  }
  return out;
}

double censoring_survival(const CoxFit& fit, const Eigen::VectorXd& x, double t) {
  return conditional_survival(fit, x, t);
}

double WeightSet::arm_probability(std::size_t i, int arm) const {
  const double p = propensity(static_cast<Eigen::Index>(i));
  return arm == 1 ? p : 1.0 - p;
}

WeightSet estimate_weights(RecordSpan trial, RecordSpan external, const WeightingOptions& options,
                           std::span<const std::string> covariate_names) {
  validate_trial(trial);
  validate_external(external);
  if (trial.empty()) throw ValidationError("weighting: the trial sample is empty");
  if (external.empty()) throw ValidationError("weighting: the external sample is empty");
  if (trial.front().covariates.size() != external.front().covariates.size())
    throw ValidationError("weighting: trial and external covariate layouts differ");

  WeightSet ws;
  const std::vector<CalibrationFunction> functions = options.calibration.empty()
                                                         ? default_calibration_functions(external, covariate_names)
                                                         : options.calibration;
  for (const auto& f : functions) ws.function_names.push_back(f.name);
  ws.target_moments = compute_target_moments(external, functions);
  CalibrationSpec spec{functions, ws.target_moments};
  const CalibrationResult cal = solve_calibration(trial, spec, options.solver);
  ws.calib_weights = cal.weights;
  ws.dual_solution = cal.lambda;
  ws.solver_diag = {cal.iterations, cal.residual, cal.effective_sample_size};

  const PropensityFit prop = options.known_propensity ? known_propensity(trial, *options.known_propensity)
                                                      : fit_propensity(trial, functions);
  ws.propensity = prop.probabilities;
  ws.propensity_coefficients = prop.coefficients;
  if (!options.known_propensity && (prop.probabilities.array() <= kPropensityClip).any())
    ws.notes.push_back("propensity: fitted probabilities clipped at " + std::to_string(kPropensityClip));

  if (options.with_ipsw) {
    ws.ipsw = ipsw_weights(trial, external, functions, options.ipsw);
    for (const auto& w : ws.ipsw->warnings) ws.notes.push_back(w);
  }
  ws.censoring = fit_censoring_models(trial, options.censoring, &ws.notes);
  for (int arm = 0; arm < 2; ++arm) {
    const auto& fit = ws.censoring[static_cast<std::size_t>(arm)];
    if (fit.columns.empty()) continue;
    std::ostringstream msg;
    msg << "censoring model arm " << arm << " covariates:";
    for (std::size_t col : fit.columns) msg << ' ' << label(col, covariate_names);
    ws.notes.push_back(msg.str());
  }
  return ws;
}

double censoring_survival(const WeightSet& weights, const Eigen::VectorXd& x, int arm, double t) {
  return censoring_survival(weights.censoring[static_cast<std::size_t>(arm)], x, t);
}

}  // namespace survtransport
