#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "survtransport/error.hpp"
#include "survtransport/survival_core.hpp"

namespace survtransport {

namespace {

std::vector<std::size_t> resolve_columns(RecordSpan records,
                                         const std::optional<std::vector<std::size_t>>& requested) {
  if (requested) return *requested;
  std::vector<std::size_t> all(static_cast<std::size_t>(records.front().covariates.size()));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

struct ColumnLabels {
  const std::vector<std::size_t>& columns;
  const std::vector<std::string>& names;

  std::string operator()(std::size_t j) const {
    const std::size_t col = columns[j];
    if (col < names.size()) return "'" + names[col] + "'";
    return "column " + std::to_string(col);
  }
};

// Sorted view of the data with time-tied blocks, shared by the likelihood
// evaluations.
struct CoxData {
  Eigen::MatrixXd z;                 // standardized covariates, sorted by time
  std::vector<double> time;          // ascending
  std::vector<char> event;
  std::vector<std::size_t> block_start;  // start index of each distinct time
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

CoxData prepare(RecordSpan records, CoxResponse response, const std::vector<std::size_t>& columns) {
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].time < records[b].time; });
  const Eigen::MatrixXd raw =
      columns.empty() ? Eigen::MatrixXd(n, 0) : covariate_matrix(records, columns);
  const auto p = static_cast<Eigen::Index>(columns.size());

  CoxData d;
  d.z.resize(static_cast<Eigen::Index>(n), p);
  d.time.resize(n);
  d.event.resize(n);
  d.center = p > 0 ? Eigen::VectorXd(raw.colwise().mean().transpose()) : Eigen::VectorXd();
  d.scale = Eigen::VectorXd::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = (raw.col(j).array() - d.center(j)).square().mean();
    d.scale(j) = std::sqrt(var);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    d.time[k] = records[i].time;
    const bool ev = records[i].event;
    d.event[k] = response == CoxResponse::Event ? ev : !ev;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double s = d.scale(j) > 0.0 ? d.scale(j) : 1.0;
      d.z(static_cast<Eigen::Index>(k), j) = (raw(static_cast<Eigen::Index>(i), j) - d.center(j)) / s;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (k == 0 || d.time[k] != d.time[k - 1]) d.block_start.push_back(k);
  return d;
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

Evaluation evaluate(const CoxData& d, const Eigen::VectorXd& beta, bool need_derivatives) {
  const auto n = static_cast<Eigen::Index>(d.time.size());
  const auto p = beta.size();
  Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(d.z * beta) : Eigen::VectorXd::Zero(n);
  const double shift = eta.maxCoeff();
  Eigen::VectorXd risk = (eta.array() - shift).exp();

  Evaluation ev;
  ev.score = Eigen::VectorXd::Zero(p);
  ev.info = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  for (std::size_t b = d.block_start.size(); b-- > 0;) {
    const std::size_t lo = d.block_start[b];
    const std::size_t hi = b + 1 < d.block_start.size() ? d.block_start[b + 1] : d.time.size();
    double deaths = 0.0;
    Eigen::VectorXd death_z = Eigen::VectorXd::Zero(p);
    double death_eta = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      s0 += risk(row);
      if (p > 0) {
        s1.noalias() += risk(row) * d.z.row(row).transpose();
        if (need_derivatives) s2.noalias() += risk(row) * d.z.row(row).transpose() * d.z.row(row);
      }
      if (d.event[k]) {
        deaths += 1.0;
        death_eta += eta(row);
        if (p > 0) death_z += d.z.row(row).transpose();
      }
    }
    if (deaths > 0.0) {
      ev.loglik += death_eta - deaths * (std::log(s0) + shift);
      if (need_derivatives && p > 0) {
        const Eigen::VectorXd zbar = s1 / s0;
        ev.score += death_z - deaths * zbar;
        ev.info += deaths * (s2 / s0 - zbar * zbar.transpose());
      }
    }
  }
  return ev;
}

[[noreturn]] void throw_singular(const Eigen::MatrixXd& info, const ColumnLabels& label,
                                 const std::string& context) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const Eigen::VectorXd v = eig.eigenvectors().col(0);
  std::ostringstream msg;
  msg << "Cox fit: singular information matrix (" << context << "); collinear columns:";
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (std::abs(v(j)) > 0.1) msg << ' ' << label(static_cast<std::size_t>(j));
  throw NumericalError(msg.str());
}

}  // namespace

double CoxFit::relative_risk(const Eigen::VectorXd& x) const {
  double eta = 0.0;
  for (std::size_t j = 0; j < columns.size(); ++j)
    eta += coefficients(static_cast<Eigen::Index>(j)) * x(static_cast<Eigen::Index>(columns[j]));
  return std::exp(eta);
}

double CoxFit::cumulative_hazard(const Eigen::VectorXd& x, double t) const {
  if (baseline_cumhaz.empty()) return 0.0;
  return baseline_cumhaz(t) * relative_risk(x);
}

double conditional_survival(const CoxFit& fit, const Eigen::VectorXd& x, double t) {
  return std::exp(-fit.cumulative_hazard(x, t));
}

CoxFit fit_cox(RecordSpan records, CoxResponse response, const CoxOptions& options) {
  if (records.empty()) throw ValidationError("Cox fit: empty input");
  validate_trial(records);
  CoxFit fit;
  fit.response = response;
  fit.columns = resolve_columns(records, options.columns);
  const ColumnLabels label{fit.columns, options.column_names};
  const auto p = static_cast<Eigen::Index>(fit.columns.size());

  const CoxData d = prepare(records, response, fit.columns);
  if (!d.z.allFinite()) throw ValidationError("Cox fit: missing or non-finite covariate values");
  fit.n_events = static_cast<std::size_t>(std::count(d.event.begin(), d.event.end(), 1));
  fit.coefficients = Eigen::VectorXd::Zero(p);
  fit.information = Eigen::MatrixXd::Zero(p, p);

  if (fit.n_events == 0) {
    fit.converged = true;
    return fit;
  }
  if (p > 0 && fit.n_events <= static_cast<std::size_t>(p))
    throw ValidationError("Cox fit: " + std::to_string(p) + " covariates need more than " +
                          std::to_string(fit.n_events) + " events");

  for (Eigen::Index j = 0; j < p; ++j)
    if (!(d.scale(j) > 0.0))
      throw NumericalError("Cox fit: singular information matrix; " +
                           label(static_cast<std::size_t>(j)) + " is constant");
  if (p > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.z);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      std::ostringstream msg;
      msg << "Cox fit: singular information matrix; collinear columns:";
      for (Eigen::Index k = qr.rank(); k < p; ++k)
        msg << ' ' << label(static_cast<std::size_t>(qr.colsPermutation().indices()(k)));
      throw NumericalError(msg.str());
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Evaluation cur = evaluate(d, beta, true);
  fit.loglik_trace.push_back(cur.loglik);
  int iter = 0;
  for (;; ++iter) {
    const double norm = p > 0 ? cur.score.lpNorm<Eigen::Infinity>() : 0.0;
    if (norm < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw_singular(cur.info, label, "Newton step");
    const Eigen::VectorXd step = ldlt.solve(cur.score);
    double scale = 1.0;
    Evaluation next;
    Eigen::VectorXd candidate;
    for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
      candidate = beta + scale * step;
      next = evaluate(d, candidate, true);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) break;
    }
    if (!std::isfinite(next.loglik)) break;
    beta = candidate;
    cur = std::move(next);
    fit.loglik_trace.push_back(cur.loglik);
  }
  fit.n_iterations = iter;
  fit.score_norm = p > 0 ? cur.score.lpNorm<Eigen::Infinity>() : 0.0;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "Cox fit did not converge after " << iter << " iterations; score sup-norm " << fit.score_norm
        << "; last iterate (standardized) [" << beta.transpose() << "]";
    throw NumericalError(msg.str());
  }

  if (p > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cur.info);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-10 * std::max(top, 1e-300)))
      throw_singular(cur.info, label, "at the optimum");
  }

  fit.log_partial_likelihood = cur.loglik;
  fit.coefficients = beta.cwiseQuotient(d.scale);
  fit.information = d.scale.asDiagonal() * cur.info * d.scale.asDiagonal();

  // Breslow baseline referenced to x = 0.
  const double offset = p > 0 ? fit.coefficients.dot(d.center) : 0.0;
  const Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(d.z * beta) : Eigen::VectorXd::Zero(d.z.rows());
  const double shift = eta.maxCoeff();
  std::vector<double> jump_times, jumps;
  double s0 = 0.0;
  for (std::size_t b = d.block_start.size(); b-- > 0;) {
    const std::size_t lo = d.block_start[b];
    const std::size_t hi = b + 1 < d.block_start.size() ? d.block_start[b + 1] : d.time.size();
    double deaths = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      s0 += std::exp(eta(static_cast<Eigen::Index>(k)) - shift);
      if (d.event[k]) deaths += 1.0;
    }
    if (deaths > 0.0) {
      jump_times.push_back(d.time[lo]);
      jumps.push_back(deaths / s0 * std::exp(-shift - offset));
    }
  }
  std::reverse(jump_times.begin(), jump_times.end());
  std::reverse(jumps.begin(), jumps.end());
  double cum = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    cum += jumps[k];
    fit.baseline_cumhaz.times.push_back(jump_times[k]);
    fit.baseline_cumhaz.values.push_back(cum);
  }
  return fit;
}

}  // namespace survtransport
