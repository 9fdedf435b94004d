#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "survtransport/error.hpp"
#include "survtransport/hare.hpp"
#include "design.hpp"

namespace survtransport::hare_detail {

namespace {

// J_m(c) = int_0^1 s^m e^{cs} ds for m = 0, 1, 2.
void moment_integrals(double c, double& j0, double& j1, double& j2) {
  if (std::abs(c) < 2.0) {
    j0 = j1 = j2 = 0.0;
    double term = 1.0;  // c^r / r!
    for (int r = 0; r < 60; ++r) {
      j0 += term / (r + 1);
      j1 += term / (r + 2);
      j2 += term / (r + 3);
      term *= c / (r + 1);
      if (std::abs(term) < 1e-18) break;
    }
    return;
  }
  const double e = std::exp(c);
  j0 = std::expm1(c) / c;
  j1 = (e - j0) / c;
  j2 = (e - 2.0 * j1) / c;
}

}  // namespace

Design::Design(RecordSpan records, const HareBasis& basis_in) : basis(basis_in) {
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].time < records[b].time; });
  const auto k = static_cast<Eigen::Index>(basis.size());
  c.resize(static_cast<Eigen::Index>(n), k);
  time.resize(static_cast<Eigen::Index>(n));
  event_sum = Eigen::VectorXd::Zero(k);
  for (std::size_t r = 0; r < n; ++r) {
    const SubjectRecord& rec = records[order[r]];
    const auto row = static_cast<Eigen::Index>(r);
    time(row) = rec.time;
    for (Eigen::Index j = 0; j < k; ++j) {
      const HareTerm& term = basis.terms[static_cast<std::size_t>(j)];
      c(row, j) = term.covariate_part(rec.covariates);
      if (rec.event) event_sum(j) += c(row, j) * term.time_part(rec.time);
    }
    if (rec.event) ++events;
  }
  if (!c.allFinite()) throw ValidationError("HARE fit: missing or non-finite covariate values");

  const std::vector<double> starts = basis.segment_starts();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Segment seg;
    seg.lo = starts[s];
    seg.hi = s + 1 < starts.size() ? starts[s + 1] : std::numeric_limits<double>::infinity();
    seg.alpha = Eigen::VectorXd::Zero(k);
    seg.gamma = Eigen::VectorXd::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const HareFactor* f = basis.terms[static_cast<std::size_t>(j)].time_factor();
      if (!f) {
        seg.alpha(j) = 1.0;
      } else if (f->kind == FactorKind::TimeLinear) {
        seg.gamma(j) = 1.0;
      } else if (seg.lo < f->knot) {
        seg.alpha(j) = f->knot;
        seg.gamma(j) = -1.0;
      }
    }
    seg.has_slope = seg.gamma.cwiseAbs().maxCoeff() > 0.0;
    const double* first = std::upper_bound(time.data(), time.data() + time.size(), seg.lo);
    seg.row_start = static_cast<Eigen::Index>(first - time.data());
    if (seg.row_start < static_cast<Eigen::Index>(n)) segments.push_back(std::move(seg));
  }
}

Evaluation Design::evaluate(const Eigen::VectorXd& beta, bool derivatives) const {
  const auto k = beta.size();
  Evaluation ev;
  ev.loglik = beta.dot(event_sum);
  if (derivatives) {
    ev.score = event_sum;
    ev.info = Eigen::MatrixXd::Zero(k, k);
  }
  for (const Segment& seg : segments) {
    const Eigen::Index m = c.rows() - seg.row_start;
    const auto cb = c.bottomRows(m);
    const Eigen::VectorXd a = cb * beta.cwiseProduct(seg.alpha);
    const Eigen::VectorXd b = seg.has_slope ? Eigen::VectorXd(cb * beta.cwiseProduct(seg.gamma))
                                            : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd i0(m), i1(m), i2(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const double hi = std::min(time(seg.row_start + r), seg.hi);
      const double h = hi - seg.lo;
      const double scale = std::exp(a(r) + b(r) * seg.lo) * h;
      double j0, j1, j2;
      moment_integrals(b(r) * h, j0, j1, j2);
      i0(r) = scale * j0;
      if (derivatives) {
        i1(r) = scale * (seg.lo * j0 + h * j1);
        i2(r) = scale * (seg.lo * seg.lo * j0 + 2.0 * seg.lo * h * j1 + h * h * j2);
      }
    }
    ev.loglik -= i0.sum();
    if (!derivatives) continue;
    const Eigen::MatrixXd g0 = cb.transpose() * i0.asDiagonal() * cb;
    ev.score -= seg.alpha.cwiseProduct(cb.transpose() * i0);
    ev.info += seg.alpha.asDiagonal() * g0 * seg.alpha.asDiagonal();
    if (seg.has_slope) {
      const Eigen::MatrixXd g1 = cb.transpose() * i1.asDiagonal() * cb;
      const Eigen::MatrixXd g2 = cb.transpose() * i2.asDiagonal() * cb;
      ev.score -= seg.gamma.cwiseProduct(cb.transpose() * i1);
      const Eigen::MatrixXd cross = seg.alpha.asDiagonal() * g1 * seg.gamma.asDiagonal();
      ev.info += cross + cross.transpose() + seg.gamma.asDiagonal() * g2 * seg.gamma.asDiagonal();
    }
  }
  if (!std::isfinite(ev.loglik)) ev.loglik = -std::numeric_limits<double>::infinity();
  return ev;
}

}  // namespace survtransport::hare_detail

namespace survtransport {

using hare_detail::Design;
using hare_detail::Evaluation;

double hare_log_likelihood(RecordSpan records, const HareBasis& basis, const Eigen::VectorXd& beta) {
  if (beta.size() != static_cast<Eigen::Index>(basis.size()))
    throw ValidationError("HARE: coefficient count does not match the basis");
  return Design(records, basis).evaluate(beta, false).loglik;
}

HareFit fit_hare_fixed_basis(RecordSpan records, const HareBasis& basis, const HareFitOptions& options) {
  if (records.empty()) throw ValidationError("HARE fit: empty input");
  validate_trial(records);
  if (!basis.contains(HareTerm{})) throw ValidationError("HARE fit: the basis must include the constant term");
  const Design design(records, basis);
  const auto k = static_cast<Eigen::Index>(basis.size());
  if (design.events < basis.size())
    throw ValidationError("HARE fit: " + std::to_string(basis.size()) + " terms need at least as many events, got " +
                          std::to_string(design.events));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  const double total_time = design.time.sum();
  const auto constant = static_cast<Eigen::Index>(
      std::find(basis.terms.begin(), basis.terms.end(), HareTerm{}) - basis.terms.begin());
  beta(constant) = std::log(static_cast<double>(design.events) / total_time);
  Evaluation cur = design.evaluate(beta, true);
  if (options.start && options.start->size() == k) {
    Evaluation warm = design.evaluate(*options.start, true);
    if (std::isfinite(warm.loglik) && warm.loglik > cur.loglik) {
      beta = *options.start;
      cur = std::move(warm);
    }
  }

  HareFit fit;
  int iter = 0;
  auto scaled_norm = [&](const Evaluation& ev) {
    double v = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      v = std::max(v, std::abs(ev.score(j)) / std::sqrt(std::max(ev.info(j, j), 1e-300)));
    return v;
  };
  auto throw_rank = [&](const Eigen::MatrixXd& scaled) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
    std::ostringstream msg;
    msg << "HARE fit: rank-deficient design; terms involved:";
    for (Eigen::Index j = 0; j < k; ++j)
      if (std::abs(eig.eigenvectors()(j, 0)) > 0.1)
        msg << ' ' << basis.terms[static_cast<std::size_t>(j)].label();
    throw NumericalError(msg.str());
  };
  for (;; ++iter) {
    fit.score_norm = scaled_norm(cur);
    if (fit.score_norm < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    const Eigen::VectorXd d = cur.info.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = d.asDiagonal() * cur.info * d.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() < 1e-11 ||
        cur.info.diagonal().minCoeff() <= 0.0)
      throw_rank(scaled);
    const Eigen::VectorXd step = d.asDiagonal() * ldlt.solve(d.asDiagonal() * cur.score);
    double s = 1.0;
    Eigen::VectorXd candidate;
    Evaluation next;
    bool improved = false;
    for (int h = 0; h < 40; ++h, s *= 0.5) {
      candidate = beta + s * step;
      next = design.evaluate(candidate, true);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    beta = candidate;
    cur = std::move(next);
  }
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "HARE fit did not converge after " << iter << " iterations; scaled score " << fit.score_norm;
    throw NumericalError(msg.str());
  }
  {
    const Eigen::VectorXd d = cur.info.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = d.asDiagonal() * cur.info * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-11)) throw_rank(scaled);
  }

  fit.basis = basis;
  fit.coefficients = beta;
  fit.log_likelihood = cur.loglik;
  fit.information = cur.info;
  fit.iterations = iter;
  fit.n_events = design.events;
  fit.n_records = records.size();
  fit.penalty = options.penalty;
  fit.aic = -2.0 * cur.loglik + 2.0 * static_cast<double>(k);
  fit.criterion = -2.0 * cur.loglik + options.penalty * static_cast<double>(k);
  return fit;
}

}  // namespace survtransport
