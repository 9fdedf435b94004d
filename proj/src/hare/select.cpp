#include <algorithm>
#include <cmath>
#include <optional>

#include "survtransport/error.hpp"
#include "survtransport/hare.hpp"
#include "survtransport/stats.hpp"

namespace survtransport {

namespace {

HareFactor linear_of(const HareFactor& f) {
  if (f.kind == FactorKind::CovariateKnot) return {FactorKind::CovariateLinear, f.column, 0.0};
  if (f.kind == FactorKind::TimeKnot) return {FactorKind::TimeLinear, 0, 0.0};
  return f;
}

// Terms that must stay in the basis while `term` is present.
std::vector<HareTerm> parents(const HareTerm& term) {
  std::vector<HareTerm> out;
  if (term.factors.size() == 2) {
    out.push_back({{term.factors[0]}});
    out.push_back({{term.factors[1]}});
  } else if (term.factors.size() == 1 && !(linear_of(term.factors[0]) == term.factors[0])) {
    out.push_back({{linear_of(term.factors[0])}});
  }
  return out;
}

std::vector<double> candidate_knots(std::vector<double> values, const std::vector<double>& probs) {
  std::sort(values.begin(), values.end());
  std::vector<double> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> out;
  if (distinct.size() <= 2) return out;
  for (double p : probs) {
    const double k = stats::quantile(values, p);
    if (k <= distinct.front() || k >= distinct.back()) continue;
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  return out;
}

std::vector<HareTerm> candidates(const HareBasis& basis, std::span<const std::size_t> columns,
                                 const std::vector<std::vector<double>>& covariate_knots,
                                 const std::vector<double>& time_knots) {
  std::vector<HareTerm> out;
  auto offer = [&](HareTerm t) {
    if (basis.contains(t)) return;
    for (const auto& p : parents(t))
      if (!basis.contains(p)) return;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  };
  const HareFactor time_linear{FactorKind::TimeLinear, 0, 0.0};
  for (std::size_t a = 0; a < columns.size(); ++a) {
    const HareFactor lin{FactorKind::CovariateLinear, columns[a], 0.0};
    for (double k : covariate_knots[a]) offer({{HareFactor{FactorKind::CovariateKnot, columns[a], k}}});
    for (std::size_t b = a + 1; b < columns.size(); ++b)
      offer({{lin, HareFactor{FactorKind::CovariateLinear, columns[b], 0.0}}});
    offer({{lin, time_linear}});
    for (double k : time_knots) offer({{lin, HareFactor{FactorKind::TimeKnot, 0, k}}});
  }
  for (double k : time_knots) offer({{HareFactor{FactorKind::TimeKnot, 0, k}}});
  return out;
}

std::optional<HareFit> try_fit(RecordSpan records, const HareBasis& basis, double penalty,
                               std::optional<Eigen::VectorXd> start) {
  HareFitOptions opts;
  opts.penalty = penalty;
  opts.start = std::move(start);
  try {
    return fit_hare_fixed_basis(records, basis, opts);
  } catch (const NumericalError&) {
    return std::nullopt;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

HareStep step_of(const HareFit& fit, std::string action, std::string term) {
  return {std::move(action), std::move(term), fit.basis.size(), fit.log_likelihood, fit.aic, fit.criterion};
}

}  // namespace

HareFit fit_hare(RecordSpan records, const HareConfig& config) {
  if (records.empty()) throw ValidationError("HARE: empty input");
  validate_trial(records);
  const auto events =
      static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.event; }));
  if (events < config.min_events)
    throw ValidationError("HARE: " + std::to_string(events) + " events, at least " +
                          std::to_string(config.min_events) + " required");
  std::vector<std::size_t> requested;
  if (config.columns) {
    requested = *config.columns;
  } else {
    requested.resize(static_cast<std::size_t>(records.front().covariates.size()));
    for (std::size_t j = 0; j < requested.size(); ++j) requested[j] = j;
  }
  const std::vector<std::size_t> columns = requested.empty() ? requested : varying_columns(records, requested);
  const double penalty = config.penalty.value_or(std::log(static_cast<double>(records.size())));
  const std::size_t max_terms = config.max_terms.value_or(std::min<std::size_t>(12, events / 10));
  const auto names = std::span<const std::string>(config.covariate_names);

  HareBasis basis = hare_start_basis(columns);
  HareFitOptions start_opts;
  start_opts.penalty = penalty;
  HareFit current = fit_hare_fixed_basis(records, basis, start_opts);
  std::vector<HareStep> trace{step_of(current, "start", "")};
  if (max_terms <= basis.size()) {
    current.selection_trace = std::move(trace);
    current.covariate_names = config.covariate_names;
    return current;
  }

  std::vector<std::vector<double>> cov_knots;
  for (std::size_t c : columns) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.covariates(static_cast<Eigen::Index>(c)));
    cov_knots.push_back(candidate_knots(std::move(v), config.covariate_knot_quantiles));
  }
  std::vector<double> event_times;
  for (const auto& r : records)
    if (r.event) event_times.push_back(r.time);
  std::vector<double> time_knots = candidate_knots(event_times, config.time_knot_quantiles);
  std::erase_if(time_knots, [](double k) { return k <= 0.0; });

  // Addition.
  while (current.basis.size() < max_terms) {
    std::optional<HareFit> best;
    HareTerm best_term;
    for (const HareTerm& term : candidates(current.basis, columns, cov_knots, time_knots)) {
      HareBasis trial_basis = current.basis;
      trial_basis.terms.push_back(term);
      Eigen::VectorXd start(static_cast<Eigen::Index>(trial_basis.size()));
      start << current.coefficients, 0.0;
      auto fit = try_fit(records, trial_basis, penalty, start);
      if (fit && (!best || fit->criterion < best->criterion)) {
        best = std::move(fit);
        best_term = term;
      }
    }
    if (!best || !(best->criterion < current.criterion - 1e-9)) break;
    current = std::move(*best);
    trace.push_back(step_of(current, "add", best_term.label(names)));
  }

  // Deletion of the least significant removable term.
  while (current.basis.size() > 1) {
    const Eigen::MatrixXd cov = current.information.inverse();
    std::optional<std::size_t> weakest;
    double weakest_z2 = INFINITY;
    for (std::size_t k = 0; k < current.basis.size(); ++k) {
      const HareTerm& term = current.basis.terms[k];
      if (term.is_constant()) continue;
      bool needed = false;
      for (const HareTerm& other : current.basis.terms)
        for (const HareTerm& p : parents(other))
          if (p == term) needed = true;
      if (needed) continue;
      const auto j = static_cast<Eigen::Index>(k);
      const double z2 = current.coefficients(j) * current.coefficients(j) / cov(j, j);
      if (z2 < weakest_z2) {
        weakest_z2 = z2;
        weakest = k;
      }
    }
    if (!weakest) break;
    HareBasis reduced = current.basis;
    reduced.terms.erase(reduced.terms.begin() + static_cast<std::ptrdiff_t>(*weakest));
    Eigen::VectorXd start(static_cast<Eigen::Index>(reduced.size()));
    for (std::size_t k = 0, r = 0; k < current.basis.size(); ++k)
      if (k != *weakest) start(static_cast<Eigen::Index>(r++)) = current.coefficients(static_cast<Eigen::Index>(k));
    auto fit = try_fit(records, reduced, penalty, start);
    if (!fit || !(fit->criterion < current.criterion - 1e-9)) break;
    const std::string label = current.basis.terms[*weakest].label(names);
    current = std::move(*fit);
    trace.push_back(step_of(current, "delete", label));
  }

  current.selection_trace = std::move(trace);
  current.covariate_names = config.covariate_names;
  return current;
}

}  // namespace survtransport
