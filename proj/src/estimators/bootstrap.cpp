#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "survtransport/error.hpp"
#include "survtransport/estimators.hpp"
#include "survtransport/stats.hpp"

namespace survtransport {

namespace {

struct Replicate {
  // Per requested estimator: tau (NaN on failure) and curve values at the
  // point estimate's report times, per arm.
  std::vector<double> tau;
  std::vector<std::array<std::vector<double>, 2>> curves;
  std::vector<std::string> messages;
};

Records resample(RecordSpan records, std::mt19937_64& rng) {
  Records out;
  out.reserve(records.size());
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(records[pick(rng)]);
  return out;
}

Replicate run_replicate(RecordSpan trial, RecordSpan external, const PipelineConfig& config,
                        const PipelineResult& point, std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  Records boot_trial;
  for (int arm = 0; arm < 2; ++arm) {
    const Records arm_records = filter_arm(trial, arm);
    if (arm_records.empty()) continue;
    Records drawn = resample(arm_records, rng);
    boot_trial.insert(boot_trial.end(), drawn.begin(), drawn.end());
  }
  const Records boot_external = external.empty() ? Records{} : resample(external, rng);

  const std::size_t k = config.estimators.size();
  Replicate rep;
  rep.tau.assign(k, std::numeric_limits<double>::quiet_NaN());
  rep.curves.resize(k);
  rep.messages.resize(k);
  try {
    const PipelineResult res = run_estimators(boot_trial, boot_external, config, false);
    for (std::size_t e = 0; e < k; ++e) {
      const EstimatorResult& r = res.estimates[e];
      const EstimatorResult* ref = point.find(r.tag);
      if (!r.failure.empty() || !r.curves || !std::isfinite(r.tate.tau)) {
        rep.messages[e] = r.failure.empty() ? "non-finite estimate" : r.failure;
        continue;
      }
      rep.tau[e] = r.tate.tau;
      for (std::size_t a = 0; a < 2; ++a) {
        if (!ref || !ref->curves) continue;
        for (double t : ref->curves->arms[a].times) rep.curves[e][a].push_back(r.curves->arms[a].value_at(t));
      }
    }
  } catch (const Error& err) {
    // Whole replicate failed; every estimator counts it.
    rep.messages.assign(k, err.what());
  }
  return rep;
}

}  // namespace

BootstrapResult bootstrap(RecordSpan trial, RecordSpan external, const PipelineConfig& config,
                          const PipelineResult& point, const BootstrapOptions& options) {
  if (options.replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
  const int b = options.replicates;
  std::vector<Replicate> reps(static_cast<std::size_t>(b));
  const int threads = std::max(1, std::min(options.threads, b));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < b; i = next++)
      reps[static_cast<std::size_t>(i)] = run_replicate(trial, external, config, point, options.seed, i);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BootstrapResult out;
  out.replicates = b;
  out.seed = options.seed;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    BootstrapEstimator be;
    be.tag = config.estimators[e];
    std::array<std::vector<std::vector<double>>, 2> columns;  // [arm][time] -> replicate values
    const EstimatorResult* ref = point.find(be.tag);
    for (std::size_t a = 0; a < 2; ++a)
      if (ref && ref->curves) columns[a].resize(ref->curves->arms[a].times.size());
    std::string first_message;
    for (const Replicate& rep : reps) {
      if (!std::isfinite(rep.tau[e])) {
        if (first_message.empty()) first_message = rep.messages[e];
        ++be.failures;
        continue;
      }
      be.tau.push_back(rep.tau[e]);
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t t = 0; t < rep.curves[e][a].size() && t < columns[a].size(); ++t)
          columns[a][t].push_back(rep.curves[e][a][t]);
    }
    if (be.failures > options.max_failure_fraction * b || be.tau.size() < 2) {
      std::ostringstream msg;
      msg << to_string(be.tag) << ": " << be.failures << " of " << b << " bootstrap replicates failed";
      if (!first_message.empty()) msg << " (first: " << first_message << ")";
      be.failure = msg.str();
      if (options.strict) throw NumericalError(be.failure);
    } else {
      be.std_error = stats::sd(be.tau);
      be.ci_lower = stats::quantile(be.tau, 0.025);
      be.ci_upper = stats::quantile(be.tau, 0.975);
      for (std::size_t a = 0; a < 2; ++a)
        for (const auto& col : columns[a]) {
          be.lower[a].push_back(stats::quantile(col, 0.025));
          be.upper[a].push_back(stats::quantile(col, 0.975));
        }
    }
    out.estimators.push_back(std::move(be));
  }
  return out;
}

void attach_bootstrap(PipelineResult& point, const BootstrapResult& boot) {
  for (const BootstrapEstimator& be : boot.estimators) {
    for (EstimatorResult& r : point.estimates) {
      if (r.tag != be.tag) continue;
      r.tate.std_error = be.std_error;
      r.tate.ci_lower = be.ci_lower;
      r.tate.ci_upper = be.ci_upper;
      if (!be.failure.empty()) point.notes.push_back(be.failure);
      if (!r.curves) continue;
      for (std::size_t a = 0; a < 2; ++a) {
        r.curves->arms[a].lower = be.lower[a];
        r.curves->arms[a].upper = be.upper[a];
      }
    }
  }
}

}  // namespace survtransport
