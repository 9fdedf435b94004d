#include "fixtures.hpp"

#include <cmath>

namespace survtransport::testing {

namespace {

double step(const std::vector<double>& t, const std::vector<double>& v, double u) {
  double out = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] <= u) out = v[k];
  return out;
}

}  // namespace

CoxFit cox_model(double beta, std::vector<double> times, std::vector<double> values) {
  CoxFit fit;
  fit.columns = {0};
  fit.coefficients = Eigen::VectorXd::Constant(1, beta);
  fit.baseline_cumhaz.times = std::move(times);
  fit.baseline_cumhaz.values = std::move(values);
  fit.converged = true;
  return fit;
}

SmallInstance small_instance() {
  SmallInstance s;
  const std::vector<double> time{1, 2, 2, 3, 5, 1.5, 4};
  const std::vector<int> event{1, 0, 1, 1, 0, 1, 0};
  const std::vector<double> x{0.5, -1, 0.2, 1.5, 0, 0.3, -0.2};
  const std::vector<int> arm{1, 1, 1, 1, 1, 0, 0};
  s.trial = oracle::trial_records(time, event, x, arm);
  for (double v : {0.3, -0.5}) {
    SubjectRecord r;
    r.source = Source::External;
    r.covariates = Eigen::VectorXd::Constant(1, v);
    s.external.push_back(r);
  }
  s.external[1].design_weight = 3.0;
  s.weights.calib_weights.resize(7);
  s.weights.calib_weights << 0.1, 0.2, 0.15, 0.25, 0.1, 0.1, 0.1;
  s.weights.propensity = Eigen::VectorXd::Constant(7, 0.5);
  s.weights.censoring[1] = cox_model(0.4, {2.0, 5.0}, {0.3, 0.6});
  s.weights.censoring[0] = cox_model(0.0, {}, {});
  s.outcome = cox_model(0.7, {1.0, 2.0, 3.0}, {0.1, 0.25, 0.4});
  return s;
}

oracle::AcwInstance oracle_instance() {
  oracle::AcwInstance inst;
  inst.time = {1, 2, 2, 3, 5};
  inst.event = {1, 0, 1, 1, 0};
  const std::vector<double> x{0.5, -1, 0.2, 1.5, 0};
  const double omega[5] = {0.1, 0.2, 0.15, 0.25, 0.1};
  for (int i = 0; i < 5; ++i) inst.q.push_back(omega[i] / 0.8);
  for (double xi : x) {
    inst.outcome.push_back([xi](double u) { return step({1, 2, 3}, {0.1, 0.25, 0.4}, u) * std::exp(0.7 * xi); });
    inst.censoring.push_back([xi](double u) { return step({2, 5}, {0.3, 0.6}, u) * std::exp(0.4 * xi); });
  }
  inst.w = {0.25, 0.75};
  for (double xj : {0.3, -0.5})
    inst.external.push_back([xj](double u) { return step({1, 2, 3}, {0.1, 0.25, 0.4}, u) * std::exp(0.7 * xj); });
  inst.grid = {1, 1.5, 2, 3, 4};
  return inst;
}

}  // namespace survtransport::testing
