#include <algorithm>
#include <cmath>
#include <sstream>

#include "common.hpp"
#include "survtransport/error.hpp"

namespace survtransport {

namespace estimators_detail {

ArmSample arm_sample(RecordSpan trial, int arm) {
  ArmSample s;
  for (std::size_t i = 0; i < trial.size(); ++i)
    if (trial[i].arm == arm) {
      s.records.push_back(trial[i]);
      s.index.push_back(i);
    }
  if (s.records.empty()) throw ValidationError("arm " + std::to_string(arm) + " has no trial records");
  return s;
}

Eigen::VectorXd arm_weights(const WeightSet& weights, const ArmSample& sample, int arm, bool ipsw) {
  if (ipsw && !weights.ipsw) throw ValidationError("IPSW weights were not estimated");
  const Eigen::VectorXd& base = ipsw ? weights.ipsw->weights : weights.calib_weights;
  Eigen::VectorXd q(static_cast<Eigen::Index>(sample.index.size()));
  for (std::size_t k = 0; k < sample.index.size(); ++k)
    q(static_cast<Eigen::Index>(k)) =
        base(static_cast<Eigen::Index>(sample.index[k])) / weights.arm_probability(sample.index[k], arm);
  const double total = q.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("arm " + std::to_string(arm) + ": weights sum to " + std::to_string(total));
  return q / total;
}

Eigen::VectorXd external_weights(RecordSpan external) {
  if (external.empty()) throw ValidationError("the external sample is empty");
  Eigen::VectorXd w(static_cast<Eigen::Index>(external.size()));
  for (std::size_t j = 0; j < external.size(); ++j) w(static_cast<Eigen::Index>(j)) = external[j].design_weight;
  return w / w.sum();
}

std::vector<double> integration_grid(RecordSpan trial, double horizon) {
  std::vector<double> grid;
  for (const auto& r : trial)
    if (r.time > 0.0 && r.time <= horizon) grid.push_back(r.time);
  if (horizon > 0.0) grid.push_back(horizon);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

void finalize_curve(SurvivalCurve& curve, bool isotonize, std::vector<std::string>& notes) {
  const std::string where = to_string(curve.tag) + " arm " + std::to_string(curve.arm) + ": ";
  int raised = 0, clamped = 0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    double& v = curve.values[k];
    if (curve.times[k] == 0.0) v = 1.0;
    // Rounding-level adjustments are applied but not reported.
    if (isotonize && k > 0 && v > curve.values[k - 1]) {
      if (v > curve.values[k - 1] + 1e-12) ++raised;
      v = curve.values[k - 1];
    }
    if (v < 0.0 || v > 1.0) {
      if (v < -1e-12 || v > 1.0 + 1e-12) ++clamped;
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  if (raised > 0) notes.push_back(where + "isotonized " + std::to_string(raised) + " time point(s)");
  if (clamped > 0) notes.push_back(where + "clamped " + std::to_string(clamped) + " value(s) to [0, 1]");
}

}  // namespace estimators_detail

using namespace estimators_detail;

namespace {

void check_horizon(const EstimatorOptions& options) {
  if (!(options.horizon > 0.0) || !std::isfinite(options.horizon))
    throw ValidationError("horizon must be positive");
}

}  // namespace

CurvePair estimate_or(RecordSpan trial, RecordSpan external, const std::array<OutcomeModel, 2>& models,
                      const EstimatorOptions& options, EstimatorTag tag) {
  check_horizon(options);
  const std::vector<double> times = report_times(trial, options.horizon);
  const Eigen::VectorXd w = external_weights(external);
  CurvePair out;
  for (int arm = 0; arm < 2; ++arm) {
    const HazardPath path(models[static_cast<std::size_t>(arm)], external);
    SurvivalCurve& c = out.arms[static_cast<std::size_t>(arm)];
    c.tag = tag;
    c.arm = arm;
    c.times = times;
    for (double t : times) c.values.push_back(w.dot((-path.at(t)).array().exp().matrix()));
    finalize_curve(c, true, out.notes);
  }
  return out;
}

CurvePair estimate_rct_only(RecordSpan trial, const std::array<OutcomeModel, 2>& models,
                            const EstimatorOptions& options, EstimatorTag tag) {
  check_horizon(options);
  const std::vector<double> times = report_times(trial, options.horizon);
  CurvePair out;
  for (int arm = 0; arm < 2; ++arm) {
    const HazardPath path(models[static_cast<std::size_t>(arm)], trial);
    SurvivalCurve& c = out.arms[static_cast<std::size_t>(arm)];
    c.tag = tag;
    c.arm = arm;
    c.times = times;
    for (double t : times) c.values.push_back((-path.at(t)).array().exp().mean());
    finalize_curve(c, true, out.notes);
  }
  return out;
}

CurvePair estimate_cw(RecordSpan trial, const WeightSet& weights, const EstimatorOptions& options, bool ipsw) {
  check_horizon(options);
  const std::vector<double> times = report_times(trial, options.horizon);
  const EstimatorTag tag = ipsw ? EstimatorTag::IPSW : EstimatorTag::CW;
  CurvePair out;
  for (int arm = 0; arm < 2; ++arm) {
    const ArmSample sample = arm_sample(trial, arm);
    const Eigen::VectorXd q = arm_weights(weights, sample, arm, ipsw);
    const HazardPath censoring(weights.censoring[static_cast<std::size_t>(arm)], sample.records);
    SurvivalCurve& c = out.arms[static_cast<std::size_t>(arm)];
    c.tag = tag;
    c.arm = arm;
    c.times = times;
    int capped = 0;
    for (double t : times) {
      const Eigen::VectorXd inflate = censoring.at(t).array().exp();
      double s = 0.0;
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (!(sample.records[static_cast<std::size_t>(i)].time > t)) continue;
        double f = inflate(i);
        if (f > options.ipcw_cap) {
          f = options.ipcw_cap;
          ++capped;
        }
        s += q(i) * f;
      }
      c.values.push_back(s);
    }
    if (capped > 0) {
      std::ostringstream msg;
      msg << to_string(tag) << " arm " << arm << ": inverse censoring weight capped at " << options.ipcw_cap
          << " for " << capped << " subject-time(s)";
      out.notes.push_back(msg.str());
    }
    finalize_curve(c, options.isotonize, out.notes);
  }
  return out;
}

}  // namespace survtransport
