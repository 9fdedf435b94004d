#include <algorithm>
#include <cmath>

#include "survtransport/error.hpp"
#include "survtransport/estimators.hpp"

namespace survtransport {

std::string to_string(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::OR_PH: return "OR_PH";
    case EstimatorTag::IPSW: return "IPSW";
    case EstimatorTag::CW: return "CW";
    case EstimatorTag::ACW_PH: return "ACW_PH";
    case EstimatorTag::ACW_HARE: return "ACW_HARE";
    case EstimatorTag::RCT_PH: return "RCT_PH";
    case EstimatorTag::RCT_HARE: return "RCT_HARE";
  }
  return "";
}

EstimatorTag parse_estimator_tag(const std::string& name) {
  for (EstimatorTag tag : kAllEstimators)
    if (to_string(tag) == name) return tag;
  throw ValidationError("unknown estimator '" + name +
                        "' (expected OR_PH, IPSW, CW, ACW_PH, ACW_HARE, RCT_PH or RCT_HARE)");
}

bool needs_external(EstimatorTag tag) { return tag != EstimatorTag::RCT_PH && tag != EstimatorTag::RCT_HARE; }

bool needs_weights(EstimatorTag tag) {
  return tag == EstimatorTag::IPSW || tag == EstimatorTag::CW || tag == EstimatorTag::ACW_PH ||
         tag == EstimatorTag::ACW_HARE;
}

bool uses_hare(EstimatorTag tag) { return tag == EstimatorTag::ACW_HARE || tag == EstimatorTag::RCT_HARE; }

double SurvivalCurve::value_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(it - times.begin() - 1)];
}

std::array<OutcomeModel, 2> fit_outcome_models(RecordSpan trial, OutcomeKind kind, const OutcomeOptions& options) {
  std::array<OutcomeModel, 2> out;
  for (int arm = 0; arm < 2; ++arm) {
    const Records recs = filter_arm(trial, arm);
    if (recs.empty()) throw ValidationError("outcome model: arm " + std::to_string(arm) + " has no records");
    std::vector<std::size_t> requested;
    if (options.columns) {
      requested = *options.columns;
    } else {
      requested.resize(static_cast<std::size_t>(recs.front().covariates.size()));
      for (std::size_t j = 0; j < requested.size(); ++j) requested[j] = j;
    }
    std::vector<std::size_t> cols = requested.empty() ? requested : varying_columns(recs, requested);
    if (kind == OutcomeKind::Cox) {
      CoxOptions opts;
      opts.columns = cols;
      opts.column_names = options.covariate_names;
      out[static_cast<std::size_t>(arm)] = fit_cox(recs, CoxResponse::Event, opts);
    } else {
      HareConfig cfg = options.hare;
      cfg.columns = cols;
      cfg.covariate_names = options.covariate_names;
      out[static_cast<std::size_t>(arm)] = fit_hare(recs, cfg);
    }
  }
  return out;
}

double cumulative_hazard(const OutcomeModel& model, const Eigen::VectorXd& x, double t) {
  return std::visit([&](const auto& m) { return m.cumulative_hazard(x, t); }, model);
}

HazardPath::HazardPath(const OutcomeModel& model, RecordSpan records)
    : size_(static_cast<Eigen::Index>(records.size())) {
  if (const auto* cox = std::get_if<CoxFit>(&model)) {
    baseline_ = cox->baseline_cumhaz;
    risk_.resize(size_);
    for (Eigen::Index i = 0; i < size_; ++i) risk_(i) = cox->relative_risk(records[static_cast<std::size_t>(i)].covariates);
    if (!risk_.allFinite()) throw ValidationError("outcome model: non-finite covariates in the evaluated sample");
    return;
  }
  cox_ = false;
  const HareFit& hare = std::get<HareFit>(model);
  starts_ = hare.basis.segment_starts();
  const auto s = static_cast<Eigen::Index>(starts_.size());
  a_.resize(size_, s);
  b_.resize(size_, s);
  cum_.resize(size_, s);
  std::vector<double> a, b;
  for (Eigen::Index i = 0; i < size_; ++i) {
    hare.segment_coefficients(records[static_cast<std::size_t>(i)].covariates, a, b);
    double total = 0.0;
    for (Eigen::Index l = 0; l < s; ++l) {
      const auto k = static_cast<std::size_t>(l);
      a_(i, l) = a[k];
      b_(i, l) = b[k];
      cum_(i, l) = total;
      if (l + 1 < s) total += exp_linear_integral(a[k], b[k], starts_[k], starts_[k + 1]);
    }
  }
  if (!a_.allFinite() || !b_.allFinite()) throw ValidationError("outcome model: non-finite covariates in the evaluated sample");
}

Eigen::VectorXd HazardPath::at(double t) const {
  if (cox_) {
    if (baseline_.empty() || !(t > 0.0)) return Eigen::VectorXd::Zero(size_);
    return baseline_(t) * risk_;
  }
  if (!(t > 0.0)) return Eigen::VectorXd::Zero(size_);
  const auto l = static_cast<Eigen::Index>(std::upper_bound(starts_.begin(), starts_.end(), t) - starts_.begin() - 1);
  const double lo = starts_[static_cast<std::size_t>(l)];
  Eigen::VectorXd out(size_);
  for (Eigen::Index i = 0; i < size_; ++i) out(i) = cum_(i, l) + exp_linear_integral(a_(i, l), b_(i, l), lo, t);
  return out;
}

std::vector<double> report_times(RecordSpan trial, double horizon) {
  std::vector<double> times{0.0};
  for (const auto& r : trial)
    if (r.event && r.time > 0.0 && r.time <= horizon) times.push_back(r.time);
  if (horizon > 0.0) times.push_back(horizon);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

TateEstimate estimate_tate(const CurvePair& curves, double horizon) {
  TateEstimate out;
  out.tag = curves.arms[1].tag;
  out.horizon = horizon;
  out.tau = curves.arms[1].value_at(horizon) - curves.arms[0].value_at(horizon);
  return out;
}

}  // namespace survtransport
