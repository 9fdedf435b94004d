#include <algorithm>
#include <numeric>

#include "survtransport/error.hpp"
#include "survtransport/stats.hpp"
#include "survtransport/survival_core.hpp"

namespace survtransport {

std::string to_string(TimeTransform transform) {
  switch (transform) {
    case TimeTransform::KaplanMeier: return "km";
    case TimeTransform::Identity: return "identity";
    case TimeTransform::Rank: return "rank";
  }
  return "km";
}

TimeTransform parse_time_transform(const std::string& name) {
  if (name == "km") return TimeTransform::KaplanMeier;
  if (name == "identity") return TimeTransform::Identity;
  if (name == "rank") return TimeTransform::Rank;
  throw ValidationError("unknown time transform '" + name + "' (expected km, identity or rank)");
}

PhTestResult schoenfeld_ph_test(const CoxFit& fit, RecordSpan records, TimeTransform transform,
                                std::span<const std::string> covariate_names) {
  if (!fit.converged) throw ValidationError("PH test: the Cox fit did not converge");
  const auto p = static_cast<Eigen::Index>(fit.columns.size());
  if (p == 0) throw ValidationError("PH test: the fit has no covariates");

  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].time < records[b].time; });
  const Eigen::MatrixXd x = covariate_matrix(records, fit.columns);
  auto is_event = [&](std::size_t i) {
    return fit.response == CoxResponse::Event ? records[i].event : !records[i].event;
  };

  // Risk-set means and left-continuous KM, walking distinct times downwards.
  const Eigen::VectorXd risk = (x * fit.coefficients).array().exp();
  std::vector<double> event_time;
  std::vector<Eigen::VectorXd> residual;
  std::vector<double> km_before;
  {
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    std::vector<std::pair<std::size_t, Eigen::VectorXd>> blocks;  // (first sorted index, xbar)
    std::size_t k = n;
    while (k > 0) {
      std::size_t lo = k - 1;
      while (lo > 0 && records[order[lo - 1]].time == records[order[k - 1]].time) --lo;
      for (std::size_t m = lo; m < k; ++m) {
        const auto i = static_cast<Eigen::Index>(order[m]);
        s0 += risk(i);
        s1 += risk(i) * x.row(i).transpose();
      }
      blocks.emplace_back(lo, s1 / s0);
      k = lo;
    }
    std::reverse(blocks.begin(), blocks.end());
    double surv = 1.0;
    double at_risk = static_cast<double>(n);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::size_t lo = blocks[b].first;
      const std::size_t hi = b + 1 < blocks.size() ? blocks[b + 1].first : n;
      double deaths = 0.0;
      for (std::size_t m = lo; m < hi; ++m) {
        const std::size_t i = order[m];
        if (!is_event(i)) continue;
        deaths += 1.0;
        event_time.push_back(records[i].time);
        residual.push_back(x.row(static_cast<Eigen::Index>(i)).transpose() - blocks[b].second);
        km_before.push_back(surv);
      }
      if (deaths > 0.0) surv *= 1.0 - deaths / at_risk;
      at_risk -= static_cast<double>(hi - lo);
    }
  }

  const std::size_t ndead = event_time.size();
  if (ndead < 2) throw ValidationError("PH test: fewer than 2 events");

  std::vector<double> g(ndead);
  switch (transform) {
    case TimeTransform::KaplanMeier:
      for (std::size_t k = 0; k < ndead; ++k) g[k] = 1.0 - km_before[k];
      break;
    case TimeTransform::Identity: g = event_time; break;
    case TimeTransform::Rank: g = stats::average_ranks(event_time); break;
  }
  const double gbar = stats::mean(g);
  for (double& v : g) v -= gbar;
  double gss = 0.0;
  for (double v : g) gss += v * v;
  if (!(gss > 0.0)) throw ValidationError("PH test: transformed event times have no spread");

  const Eigen::MatrixXd var = fit.information.inverse();
  const double nd = static_cast<double>(ndead);
  Eigen::VectorXd weighted_sum = Eigen::VectorXd::Zero(p);  // sum_k g_k r_k
  for (std::size_t k = 0; k < ndead; ++k) weighted_sum += g[k] * residual[k];

  PhTestResult out;
  out.time_transform_tag = to_string(transform);
  out.per_covariate_chisq.resize(p);
  out.per_covariate_p.resize(p);
  const Eigen::VectorXd scaled = var * weighted_sum * nd;  // sum_k g_k (scaled residual)_k
  for (Eigen::Index j = 0; j < p; ++j) {
    const double z = scaled(j) * scaled(j) / (var(j, j) * nd * gss);
    out.per_covariate_chisq(j) = z;
    out.per_covariate_p(j) = stats::chisq_upper_tail(z, 1.0);
    const std::size_t col = fit.columns[static_cast<std::size_t>(j)];
    out.covariate_labels.push_back(col < covariate_names.size() ? covariate_names[col]
                                                                : "x" + std::to_string(col));
  }
  out.global_chisq = weighted_sum.dot(var * weighted_sum) * nd / gss;
  out.global_df = static_cast<std::size_t>(p);
  out.global_p = stats::chisq_upper_tail(out.global_chisq, static_cast<double>(p));
  return out;
}

}  // namespace survtransport
