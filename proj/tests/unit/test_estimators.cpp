#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "simulation.hpp"
#include "survtransport/error.hpp"
#include "survtransport/estimators.hpp"
#include "survtransport/hare.hpp"

using namespace survtransport;
using testing::SmallInstance;
using testing::oracle_instance;
using testing::small_instance;
using testing::cox_model;

namespace {

void check_curve_invariants(const SurvivalCurve& c) {
  REQUIRE_FALSE(c.values.empty());
  CHECK(c.times.front() == 0.0);
  CHECK(c.values.front() == 1.0);
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    CHECK(c.values[k] >= 0.0);
    CHECK(c.values[k] <= 1.0);
    if (k > 0) {
      CHECK(c.values[k] <= c.values[k - 1]);
      CHECK(c.times[k] > c.times[k - 1]);
    }
  }
}

}  // namespace

TEST_CASE("ACW numerator and denominator match the hand-worked instance") {
  const SmallInstance s = small_instance();
  const AcwTrace tr = acw_trace(s.trial, s.external, s.weights, OutcomeModel(s.outcome), 1, 4.0);
  const auto [num, denom] = oracle::acw_num_denom(oracle_instance());
  REQUIRE(tr.grid == std::vector<double>{1, 1.5, 2, 3, 4});
  for (std::size_t k = 0; k < tr.grid.size(); ++k) {
    CHECK(tr.num[k] == doctest::Approx(num[k]).epsilon(1e-13));
    CHECK(tr.denom[k] == doctest::Approx(denom[k]).epsilon(1e-13));
  }
  // Frozen from the oracle.
  CHECK(denom[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(num[0] == doctest::Approx(0.05517135010757426).epsilon(1e-12));
}

TEST_CASE("ACW survival is exp of minus the summed increments") {
  const SmallInstance s = small_instance();
  std::array<OutcomeModel, 2> models{OutcomeModel(s.outcome), OutcomeModel(s.outcome)};
  EstimatorOptions opts;
  opts.horizon = 4.0;
  opts.ipcw_cap = INFINITY;
  const CurvePair c = estimate_acw(s.trial, s.external, s.weights, models, opts);
  const auto [num, denom] = oracle::acw_num_denom(oracle_instance());
  double cum = 0.0, running = 1.0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    cum += num[k] / denom[k];
    running = std::min(running, std::exp(-cum));
  }
  CHECK(c.arms[1].value_at(4.0) == doctest::Approx(std::clamp(running, 0.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("OR with a covariate-free model gives exp(-Nelson-Aalen)") {
  const std::vector<double> t{1, 2, 2, 3, 4, 5, 1.5, 2.5, 3.5, 6};
  const std::vector<int> d{1, 1, 0, 1, 0, 1, 1, 0, 1, 1};
  const std::vector<int> a{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const Records trial = oracle::trial_records(t, d, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, a);
  Records external(3);
  for (auto& r : external) {
    r.source = Source::External;
    r.covariates = Eigen::VectorXd::Constant(1, 42.0);
  }
  OutcomeOptions oo;
  oo.columns = std::vector<std::size_t>{};
  const auto models = fit_outcome_models(trial, OutcomeKind::Cox, oo);
  EstimatorOptions opts;
  opts.horizon = 5.0;
  const CurvePair orc = estimate_or(trial, external, models, opts);
  const CurvePair rct = estimate_rct_only(trial, models, opts);
  const std::vector<double> t1(t.begin(), t.begin() + 6);
  const std::vector<int> d1(d.begin(), d.begin() + 6);
  for (double u : {0.5, 1.0, 2.0, 3.2, 5.0}) {
    CHECK(orc.arms[1].value_at(u) == doctest::Approx(std::exp(-oracle::nelson_aalen(t1, d1, u))).epsilon(1e-13));
    CHECK(rct.arms[1].value_at(u) == doctest::Approx(orc.arms[1].value_at(u)).epsilon(1e-13));
  }
}

TEST_CASE("CW with uniform weights and no censoring is the arm's empirical survival") {
  std::mt19937_64 rng(41);
  testing::TransportDesign design = testing::correct_design();
  design.censoring_rate = 0.0;
  design.admin_time = 1e9;
  const StudyData data = testing::simulate_study(design, 200, 0, rng);
  WeightSet w;
  w.calib_weights = Eigen::VectorXd::Constant(200, 1.0 / 200.0);
  w.propensity = Eigen::VectorXd::Constant(200, 0.5);
  w.censoring[0] = cox_model(0.0, {}, {});
  w.censoring[1] = cox_model(0.0, {}, {});
  EstimatorOptions opts;
  opts.horizon = 20.0;
  const CurvePair c = estimate_cw(data.trial, w, opts);
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> tt;
    std::vector<int> dd;
    for (const auto& r : data.trial)
      if (r.arm == arm) {
        tt.push_back(r.time);
        dd.push_back(1);
      }
    for (double u : {1.0, 5.0, 10.0, 20.0})
      CHECK(c.arms[static_cast<std::size_t>(arm)].value_at(u) ==
            doctest::Approx(oracle::kaplan_meier(tt, dd, u)).epsilon(1e-12));
  }
}

TEST_CASE("report times hold 0, the event times and the horizon") {
  const Records trial = oracle::trial_records({1, 2, 3, 30}, {1, 0, 1, 1}, {}, {1, 0, 1, 0});
  CHECK(report_times(trial, 24.0) == std::vector<double>{0, 1, 3, 24});
}

TEST_CASE("trial-only pipeline needs no external sample or weights") {
  std::mt19937_64 rng(42);
  const StudyData data = testing::simulate_study(testing::correct_design(), 300, 0, rng);
  PipelineConfig cfg;
  cfg.estimators = {EstimatorTag::RCT_PH};
  cfg.covariate_names = data.covariate_names;
  const PipelineResult res = run_estimators(data.trial, {}, cfg, true);
  CHECK_FALSE(res.weights.has_value());
  REQUIRE(res.estimates.size() == 1);
  CHECK(res.estimates[0].failure.empty());
  check_curve_invariants(res.estimates[0].curves->arms[0]);
}

TEST_CASE("every estimator yields valid curves and a consistent tau") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 3; ++rep) {
    const StudyData data = testing::simulate_study(testing::crossing_design(rep == 1), 500, 500, rng);
    PipelineConfig cfg;
    cfg.covariate_names = data.covariate_names;
    const PipelineResult res = run_estimators(data.trial, data.external, cfg, true);
    REQUIRE(res.estimates.size() == 7);
    for (const auto& e : res.estimates) {
      CHECK(e.failure.empty());
      REQUIRE(e.curves.has_value());
      for (const auto& c : e.curves->arms) check_curve_invariants(c);
      CHECK(e.tate.tau == e.curves->arms[1].value_at(24.0) - e.curves->arms[0].value_at(24.0));
    }
  }
}

TEST_CASE("estimator tags round-trip") {
  for (EstimatorTag t : kAllEstimators) CHECK(parse_estimator_tag(to_string(t)) == t);
  CHECK_THROWS_AS(parse_estimator_tag("KM"), ValidationError);
  CHECK(uses_hare(EstimatorTag::ACW_HARE));
  CHECK_FALSE(needs_external(EstimatorTag::RCT_HARE));
}

TEST_CASE("bootstrap is deterministic in the seed and the thread count") {
  std::mt19937_64 rng(44);
  const StudyData data = testing::simulate_study(testing::correct_design(), 200, 200, rng);
  PipelineConfig cfg;
  cfg.estimators = {EstimatorTag::CW, EstimatorTag::ACW_PH};
  cfg.covariate_names = data.covariate_names;
  const PipelineResult point = run_estimators(data.trial, data.external, cfg, true);
  BootstrapOptions bo;
  bo.replicates = 20;
  bo.seed = 99;
  const BootstrapResult a = bootstrap(data.trial, data.external, cfg, point, bo);
  bo.threads = 3;
  const BootstrapResult b = bootstrap(data.trial, data.external, cfg, point, bo);
  bo.seed = 100;
  const BootstrapResult c = bootstrap(data.trial, data.external, cfg, point, bo);
  REQUIRE(a.estimators.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(a.estimators[e].tau == b.estimators[e].tau);
    CHECK(a.estimators[e].tau != c.estimators[e].tau);
    CHECK(a.estimators[e].tau.size() == 20);
    CHECK(a.estimators[e].ci_lower <= a.estimators[e].ci_upper);
    CHECK(a.estimators[e].std_error > 0.0);
  }
  PipelineResult attached = point;
  attach_bootstrap(attached, a);
  CHECK(attached.estimates[0].tate.std_error == a.estimators[0].std_error);
  CHECK(attached.estimates[0].curves->arms[1].lower.size() == attached.estimates[0].curves->arms[1].times.size());
}

TEST_CASE("strict pipeline propagates estimator failures") {
  std::mt19937_64 rng(45);
  const StudyData data = testing::simulate_study(testing::correct_design(), 100, 50, rng);
  PipelineConfig cfg;
  cfg.estimators = {EstimatorTag::ACW_HARE, EstimatorTag::OR_PH};
  cfg.covariate_names = data.covariate_names;
  cfg.outcome.hare.min_events = 100000;
  const PipelineResult res = run_estimators(data.trial, data.external, cfg, false);
  CHECK_FALSE(res.estimates[0].failure.empty());
  CHECK(std::isnan(res.estimates[0].tate.tau));
  CHECK(res.estimates[1].failure.empty());
  CHECK_THROWS_AS(run_estimators(data.trial, data.external, cfg, true), ValidationError);
}

TEST_CASE("hazard paths of a non-PH HARE model match its cumulative hazard") {
  HareFit fit;
  auto f = [](FactorKind k, std::size_t j, double knot) { return HareFactor{k, j, knot}; };
  fit.basis.terms = {HareTerm{{}},
                     HareTerm{{f(FactorKind::TimeLinear, 0, 0.0)}},
                     HareTerm{{f(FactorKind::TimeKnot, 0, 3.0)}},
                     HareTerm{{f(FactorKind::CovariateLinear, 0, 0.0)}},
                     HareTerm{{f(FactorKind::CovariateLinear, 0, 0.0), f(FactorKind::TimeLinear, 0, 0.0)}},
                     HareTerm{{f(FactorKind::CovariateKnot, 0, 0.5), f(FactorKind::TimeKnot, 0, 1.5)}}};
  fit.coefficients.resize(6);
  fit.coefficients << -2.5, 0.05, 0.3, 0.6, -0.04, 0.2;
  const Records records = oracle::trial_records({1, 2, 3}, {1, 0, 1}, {-1.2, 0.4, 2.1});
  const HazardPath path(OutcomeModel(fit), records);
  for (double t : {0.0, 0.7, 1.5, 2.9, 3.0, 6.5, 24.0}) {
    const Eigen::VectorXd lam = path.at(t);
    for (std::size_t i = 0; i < records.size(); ++i)
      CHECK(lam(static_cast<Eigen::Index>(i)) ==
            doctest::Approx(fit.cumulative_hazard(records[i].covariates, t)).epsilon(1e-13));
  }
}
