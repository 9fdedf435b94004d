#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>

#include "common.hpp"
#include "survtransport/error.hpp"

namespace survtransport {

const EstimatorResult* PipelineResult::find(EstimatorTag tag) const {
  for (const auto& e : estimates)
    if (e.tag == tag) return &e;
  return nullptr;
}

namespace {

std::vector<std::size_t> observed_columns(RecordSpan external) {
  std::vector<std::size_t> cols;
  const auto p = external.front().covariates.size();
  for (Eigen::Index j = 0; j < p; ++j)
    if (std::all_of(external.begin(), external.end(),
                    [j](const SubjectRecord& r) { return std::isfinite(r.covariates(j)); }))
      cols.push_back(static_cast<std::size_t>(j));
  return cols;
}

// Lazily computed stage whose failure is remembered and reported by every
// estimator depending on it.
template <typename T>
struct Stage {
  std::optional<T> value;
  std::exception_ptr error;
  bool attempted = false;

  const T& get(const std::function<T()>& make) {
    if (!attempted) {
      attempted = true;
      try {
        value = make();
      } catch (const Error&) {
        error = std::current_exception();
      }
    }
    if (!value) std::rethrow_exception(error);
    return *value;
  }
};

}  // namespace

PipelineResult run_estimators(RecordSpan trial, RecordSpan external, const PipelineConfig& config, bool strict) {
  validate_trial(trial);
  if (trial.empty()) throw ValidationError("the trial sample is empty");
  const bool any_external = std::any_of(config.estimators.begin(), config.estimators.end(), needs_external);
  if (any_external) {
    if (external.empty()) throw ValidationError("the requested estimators need an external sample");
    validate_external(external);
    if (external.front().covariates.size() != trial.front().covariates.size())
      throw ValidationError("trial and external covariate layouts differ");
  }

  OutcomeOptions outcome = config.outcome;
  if (outcome.covariate_names.empty()) outcome.covariate_names = config.covariate_names;
  if (!outcome.columns && !external.empty()) outcome.columns = observed_columns(external);

  const bool want_ipsw = std::find(config.estimators.begin(), config.estimators.end(), EstimatorTag::IPSW) !=
                         config.estimators.end();
  Stage<WeightSet> weights;
  Stage<std::array<OutcomeModel, 2>> cox, hare;
  auto get_weights = [&]() -> const WeightSet& {
    return weights.get([&] {
      WeightingOptions opts = config.weighting;
      opts.with_ipsw = want_ipsw;
      return estimate_weights(trial, external, opts, config.covariate_names);
    });
  };
  auto get_cox = [&]() -> const std::array<OutcomeModel, 2>& {
    return cox.get([&] { return fit_outcome_models(trial, OutcomeKind::Cox, outcome); });
  };
  auto get_hare = [&]() -> const std::array<OutcomeModel, 2>& {
    return hare.get([&] { return fit_outcome_models(trial, OutcomeKind::Hare, outcome); });
  };

  PipelineResult result;
  const EstimatorOptions& opts = config.estimation;
  for (EstimatorTag tag : config.estimators) {
    EstimatorResult r;
    r.tag = tag;
    try {
      switch (tag) {
        case EstimatorTag::OR_PH: r.curves = estimate_or(trial, external, get_cox(), opts, tag); break;
        case EstimatorTag::IPSW: r.curves = estimate_cw(trial, get_weights(), opts, true); break;
        case EstimatorTag::CW: r.curves = estimate_cw(trial, get_weights(), opts, false); break;
        case EstimatorTag::ACW_PH:
          r.curves = estimate_acw(trial, external, get_weights(), get_cox(), opts, tag);
          break;
        case EstimatorTag::ACW_HARE:
          r.curves = estimate_acw(trial, external, get_weights(), get_hare(), opts, tag);
          break;
        case EstimatorTag::RCT_PH: r.curves = estimate_rct_only(trial, get_cox(), opts, tag); break;
        case EstimatorTag::RCT_HARE: r.curves = estimate_rct_only(trial, get_hare(), opts, tag); break;
      }
      r.tate = estimate_tate(*r.curves, opts.horizon);
    } catch (const Error& e) {
      if (strict) throw;
      r.failure = e.what();
      r.tate.tag = tag;
      r.tate.horizon = opts.horizon;
      r.tate.tau = std::numeric_limits<double>::quiet_NaN();
    }
    r.tate.tag = tag;
    result.estimates.push_back(std::move(r));
  }
  result.weights = std::move(weights.value);
  if (cox.value)
    for (int a = 0; a < 2; ++a) result.cox_models[static_cast<std::size_t>(a)] = (*cox.value)[static_cast<std::size_t>(a)];
  if (hare.value)
    for (int a = 0; a < 2; ++a) result.hare_models[static_cast<std::size_t>(a)] = (*hare.value)[static_cast<std::size_t>(a)];
  if (result.weights)
    result.notes.insert(result.notes.end(), result.weights->notes.begin(), result.weights->notes.end());
  for (const auto& e : result.estimates)
    if (e.curves) result.notes.insert(result.notes.end(), e.curves->notes.begin(), e.curves->notes.end());
  return result;
}

}  // namespace survtransport
