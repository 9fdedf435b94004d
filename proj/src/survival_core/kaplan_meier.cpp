#include <algorithm>
#include <numeric>

#include "survtransport/error.hpp"
#include "survtransport/survival_core.hpp"

namespace survtransport {

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KaplanMeierCurve::survival(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival_values[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

double KaplanMeierCurve::survival_before(double t) const {
  auto it = std::lower_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival_values[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

KaplanMeierCurve fit_kaplan_meier(RecordSpan records, std::span<const double> weights) {
  if (records.empty()) throw ValidationError("Kaplan-Meier: empty input");
  if (!weights.empty() && weights.size() != records.size())
    throw ValidationError("Kaplan-Meier: weight count does not match records");
  for (const auto& r : records) {
    if (!r.is_trial()) throw ValidationError("Kaplan-Meier: external records carry no outcomes");
    if (!(r.time >= 0.0)) throw ValidationError("Kaplan-Meier: negative follow-up time");
  }
  for (double w : weights)
    if (!(w > 0.0)) throw ValidationError("Kaplan-Meier: weights must be positive");

  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return records[a].time < records[b].time; });
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double at_risk = 0.0;
  for (std::size_t i = 0; i < n; ++i) at_risk += weight(i);

  KaplanMeierCurve curve;
  double surv = 1.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = records[order[i]].time;
    double deaths = 0.0, leaving = 0.0;
    std::size_t j = i;
    for (; j < n && records[order[j]].time == t; ++j) {
      leaving += weight(order[j]);
      if (records[order[j]].event) deaths += weight(order[j]);
    }
    if (deaths > 0.0) {
      surv *= 1.0 - deaths / at_risk;
      curve.event_times.push_back(t);
      curve.survival_values.push_back(surv);
      curve.at_risk_counts.push_back(at_risk);
      curve.event_counts.push_back(deaths);
    }
    at_risk -= leaving;
    i = j;
  }
  return curve;
}

}  // namespace survtransport
