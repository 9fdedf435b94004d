#include <algorithm>
#include <cmath>
#include <sstream>

#include "common.hpp"
#include "survtransport/error.hpp"

namespace survtransport {

using namespace estimators_detail;

namespace {

struct AcwPieces {
  AcwTrace trace;
  int capped = 0;
};

// Integrals on the pooled trial time grid; integrands are taken at the
// previous grid point (left limits for the step-function nuisances).
AcwPieces acw_pieces(RecordSpan trial, RecordSpan external, const WeightSet& weights, const OutcomeModel& model,
                     int arm, double horizon, double cap) {
  const ArmSample sample = arm_sample(trial, arm);
  const Eigen::VectorXd q = arm_weights(weights, sample, arm, false);
  const Eigen::VectorXd w = external_weights(external);
  const HazardPath outcome_trial(model, sample.records);
  const HazardPath outcome_ext(model, external);
  const HazardPath censoring(weights.censoring[static_cast<std::size_t>(arm)], sample.records);

  const Eigen::Index n = q.size();
  Eigen::VectorXd time(n), event(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    time(i) = sample.records[static_cast<std::size_t>(i)].time;
    event(i) = sample.records[static_cast<std::size_t>(i)].event ? 1.0 : 0.0;
  }

  AcwPieces out;
  out.trace.grid = integration_grid(trial, horizon);
  Eigen::VectorXd lam_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lam_ext_prev = Eigen::VectorXd::Zero(external.size());
  Eigen::VectorXd lamc_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd aug = Eigen::VectorXd::Ones(n);  // exp(-Lambda_i) times the augmentation factor
  for (double u : out.trace.grid) {
    const Eigen::VectorXd lam = outcome_trial.at(u);
    const Eigen::VectorXd lam_ext = outcome_ext.at(u);
    const Eigen::VectorXd lamc = censoring.at(u);
    Eigen::VectorXd inflate = lamc_prev.array().exp();
    for (Eigen::Index i = 0; i < n; ++i)
      if (inflate(i) > cap) {
        inflate(i) = cap;
        ++out.capped;
      }
    const Eigen::VectorXd surv_ext = (-lam_ext_prev).array().exp();
    const Eigen::VectorXd d_lam = lam - lam_prev;
    const Eigen::VectorXd d_lamc = lamc - lamc_prev;

    double denom = w.dot(surv_ext) - q.dot(aug);
    double num = w.dot(surv_ext.cwiseProduct(lam_ext - lam_ext_prev)) - q.dot(aug.cwiseProduct(d_lam));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (time(i) < u) continue;
      const double qi = q(i) * inflate(i);
      denom += qi;
      const bool here = time(i) == u;
      if (here && event(i) > 0.0) num += qi;
      const double d_mc = (here && event(i) == 0.0 ? 1.0 : 0.0) - d_lamc(i);
      aug(i) -= inflate(i) * d_mc;
    }
    aug.array() *= (-d_lam).array().exp();
    out.trace.num.push_back(num);
    out.trace.denom.push_back(denom);
    lam_prev = lam;
    lam_ext_prev = lam_ext;
    lamc_prev = lamc;
  }
  return out;
}

}  // namespace

AcwTrace acw_trace(RecordSpan trial, RecordSpan external, const WeightSet& weights, const OutcomeModel& model,
                   int arm, double horizon) {
  return acw_pieces(trial, external, weights, model, arm, horizon, INFINITY).trace;
}

CurvePair estimate_acw(RecordSpan trial, RecordSpan external, const WeightSet& weights,
                       const std::array<OutcomeModel, 2>& models, const EstimatorOptions& options, EstimatorTag tag) {
  if (!(options.horizon > 0.0) || !std::isfinite(options.horizon))
    throw ValidationError("horizon must be positive");
  const std::vector<double> times = report_times(trial, options.horizon);
  CurvePair out;
  for (int arm = 0; arm < 2; ++arm) {
    const AcwPieces p =
        acw_pieces(trial, external, weights, models[static_cast<std::size_t>(arm)], arm, options.horizon,
                   options.ipcw_cap);
    const AcwTrace& tr = p.trace;
    if (p.capped > 0) {
      std::ostringstream msg;
      msg << to_string(tag) << " arm " << arm << ": inverse censoring weight capped at " << options.ipcw_cap
          << " for " << p.capped << " subject-time(s)";
      out.notes.push_back(msg.str());
    }
    SurvivalCurve& c = out.arms[static_cast<std::size_t>(arm)];
    c.tag = tag;
    c.arm = arm;
    c.times = times;
    double cum = 0.0;
    std::size_t g = 0;
    for (double t : times) {
      for (; g < tr.grid.size() && tr.grid[g] <= t; ++g) {
        if (!(tr.denom[g] > 0.0)) {
          std::ostringstream msg;
          msg << to_string(tag) << " arm " << arm << ": denominator " << tr.denom[g] << " is not positive at t = "
              << tr.grid[g] << " (extreme weights or outcome model failure)";
          throw NumericalError(msg.str());
        }
        cum += tr.num[g] / tr.denom[g];
      }
      c.values.push_back(std::exp(-cum));
    }
    finalize_curve(c, true, out.notes);
  }
  return out;
}

}  // namespace survtransport
