#include <algorithm>
#include <cmath>

#include "survtransport/emulation.hpp"
#include "survtransport/error.hpp"

namespace survtransport {

RobustnessReport emulation_robustness_report(RecordSpan trial, const SummarySpec& spec,
                                             const std::vector<CopulaVariant>& variants, int n_repeats,
                                             std::uint64_t seed, const PipelineConfig& config,
                                             const std::function<Records(const EmulatedSample&)>& to_external) {
  if (n_repeats < 1) throw ValidationError("robustness report: n_repeats must be at least 1");
  if (variants.empty()) throw ValidationError("robustness report: at least one copula variant is required");
  const std::size_t k = config.estimators.size();
  const std::vector<double> times = report_times(trial, config.estimation.horizon);
  const std::size_t nt = times.size();

  RobustnessReport report;
  report.entries.resize(k);
  // Per estimator, arm and time: running min and max across runs.
  std::vector<std::array<std::vector<double>, 2>> lo(k), hi(k);
  for (std::size_t e = 0; e < k; ++e) {
    report.entries[e].tag = config.estimators[e];
    for (auto& v : lo[e]) v.assign(nt, INFINITY);
    for (auto& v : hi[e]) v.assign(nt, -INFINITY);
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (int r = 0; r < n_repeats; ++r) {
      ++report.runs;
      const EmulatedSample sample =
          emulate_sample(spec, variants[v].copula, spec.m, derive_seed(seed, v, static_cast<std::uint64_t>(r)));
      const Records external = to_external(sample);
      const PipelineResult res = run_estimators(trial, external, config, false);
      for (std::size_t e = 0; e < k; ++e) {
        const EstimatorResult& er = res.estimates[e];
        RobustnessEntry& entry = report.entries[e];
        if (!er.failure.empty() || !er.curves) {
          ++entry.failures;
          continue;
        }
        entry.tau.push_back(er.tate.tau);
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t t = 0; t < nt; ++t) {
            const double s = er.curves->arms[a].value_at(times[t]);
            lo[e][a][t] = std::min(lo[e][a][t], s);
            hi[e][a][t] = std::max(hi[e][a][t], s);
          }
      }
    }
  }
  for (std::size_t e = 0; e < k; ++e) {
    RobustnessEntry& entry = report.entries[e];
    if (entry.tau.empty()) continue;
    const auto [mn, mx] = std::minmax_element(entry.tau.begin(), entry.tau.end());
    entry.tau_spread = *mx - *mn;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t t = 0; t < nt; ++t)
        entry.max_curve_spread = std::max(entry.max_curve_spread, hi[e][a][t] - lo[e][a][t]);
  }
  return report;
}

}  // namespace survtransport
