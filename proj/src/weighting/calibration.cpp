#include <algorithm>
#include <cmath>
#include <sstream>

#include "survtransport/error.hpp"
#include "survtransport/weighting.hpp"

namespace survtransport {

CalibrationFunction moment_function(std::size_t column, std::string name, int power) {
  const auto j = static_cast<Eigen::Index>(column);
  return {std::move(name), [j, power](const Eigen::VectorXd& x) {
            if (j >= x.size()) return std::nan("");
            return power == 1 ? x(j) : std::pow(x(j), power);
          }};
}

CalibrationFunction product_function(std::size_t first, std::size_t second, std::string name) {
  const auto a = static_cast<Eigen::Index>(first);
  const auto b = static_cast<Eigen::Index>(second);
  return {std::move(name), [a, b](const Eigen::VectorXd& x) {
            if (a >= x.size() || b >= x.size()) return std::nan("");
            return x(a) * x(b);
          }};
}

std::vector<std::string> CalibrationSpec::names() const {
  std::vector<std::string> out;
  out.reserve(functions.size());
  for (const auto& f : functions) out.push_back(f.name);
  return out;
}

Eigen::MatrixXd evaluate_functions(const std::vector<CalibrationFunction>& functions, RecordSpan records,
                                   const std::string& sample_label) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto k = static_cast<Eigen::Index>(functions.size());
  Eigen::MatrixXd g(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& f = functions[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = f.eval(records[static_cast<std::size_t>(i)].covariates);
      if (!std::isfinite(v))
        throw ValidationError("calibration function '" + f.name + "' is undefined for " + sample_label +
                              " record " + std::to_string(i + 1));
      g(i, c) = v;
    }
  }
  return g;
}

std::vector<CalibrationFunction> default_calibration_functions(RecordSpan external,
                                                               std::span<const std::string> names) {
  if (external.empty()) throw ValidationError("calibration: the external sample is empty");
  const auto p = external.front().covariates.size();
  std::vector<CalibrationFunction> out;
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool observed = std::all_of(external.begin(), external.end(), [j](const SubjectRecord& r) {
      return j < r.covariates.size() && std::isfinite(r.covariates(j));
    });
    if (!observed) continue;
    const auto col = static_cast<std::size_t>(j);
    out.push_back(moment_function(col, col < names.size() ? names[col] : "x" + std::to_string(col)));
  }
  if (out.empty()) throw ValidationError("calibration: no covariate is observed in the external sample");
  return out;
}

Eigen::VectorXd compute_target_moments(RecordSpan external, const std::vector<CalibrationFunction>& functions) {
  if (external.empty()) throw ValidationError("calibration: the external sample is empty");
  const Eigen::MatrixXd g = evaluate_functions(functions, external, "external");
  Eigen::VectorXd d(g.rows());
  for (Eigen::Index i = 0; i < g.rows(); ++i) d(i) = external[static_cast<std::size_t>(i)].design_weight;
  return g.transpose() * d / d.sum();
}

Eigen::VectorXd loglinear_weights(const Eigen::MatrixXd& g, const Eigen::VectorXd& eta) {
  Eigen::VectorXd s = -(g * eta);
  s.array() -= s.maxCoeff();
  Eigen::VectorXd w = s.array().exp();
  return w / w.sum();
}

namespace {

struct DualState {
  double value = 0.0;         // log sum exp(lambda' d_i)
  Eigen::VectorXd weights;    // softmax
  Eigen::VectorXd gradient;   // sum w_i d_i
};

DualState dual(const Eigen::MatrixXd& d, const Eigen::VectorXd& lambda) {
  DualState s;
  Eigen::VectorXd eta = d * lambda;
  const double top = eta.maxCoeff();
  s.weights = (eta.array() - top).exp();
  const double total = s.weights.sum();
  s.weights /= total;
  s.value = top + std::log(total);
  s.gradient = d.transpose() * s.weights;
  return s;
}

}  // namespace

CalibrationResult solve_calibration(RecordSpan trial, const CalibrationSpec& spec, const CalibrationOptions& options) {
  if (trial.empty()) throw ValidationError("calibration: the trial sample is empty");
  const auto k = static_cast<Eigen::Index>(spec.size());
  if (spec.target_moments.size() != k)
    throw ValidationError("calibration: " + std::to_string(k) + " functions but " +
                          std::to_string(spec.target_moments.size()) + " target moments");
  const Eigen::MatrixXd g = evaluate_functions(spec.functions, trial, "trial");
  const Eigen::Index n = g.rows();

  CalibrationResult out;
  out.lambda = Eigen::VectorXd::Zero(k);

  // Feasibility: every target strictly inside the trial range.
  std::vector<Eigen::Index> active;
  std::ostringstream violations;
  Eigen::VectorXd center(k), scale(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double lo = g.col(c).minCoeff(), hi = g.col(c).maxCoeff();
    const double target = spec.target_moments(c);
    center(c) = g.col(c).mean();
    scale(c) = std::sqrt((g.col(c).array() - center(c)).square().mean());
    const double tiny = 1e-12 * std::max(1.0, std::abs(center(c)));
    if (!(scale(c) > tiny)) {
      if (std::abs(target - center(c)) <= 1e-9 * std::max(1.0, std::abs(center(c)))) continue;
    } else if (target > lo && target < hi) {
      active.push_back(c);
      continue;
    }
    violations << "\n  '" << spec.functions[static_cast<std::size_t>(c)].name << "': target " << target
               << " not inside trial range [" << lo << ", " << hi << "]";
  }
  if (!violations.str().empty())
    throw ValidationError("calibration infeasible, target moments outside the trial convex hull:" +
                          violations.str());

  const auto q = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd d(n, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    const Eigen::Index c = active[static_cast<std::size_t>(a)];
    d.col(a) = (g.col(c).array() - spec.target_moments(c)) / scale(c);
  }

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(q);
  DualState cur = dual(d, lambda);
  int iter = 0;
  bool converged = q == 0;
  double best_norm = q > 0 ? cur.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  int polish = 0;
  while (!converged || polish < 2) {
    const double norm = q > 0 ? cur.gradient.lpNorm<Eigen::Infinity>() : 0.0;
    if (converged) {
      if (q == 0) break;
      ++polish;
    } else if (norm <= options.tolerance) {
      converged = true;
      continue;
    }
    if (iter >= options.max_iterations) break;
    ++iter;
    const Eigen::MatrixXd hess =
        d.transpose() * cur.weights.asDiagonal() * d - cur.gradient * cur.gradient.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && hess.diagonal().minCoeff() > 1e-14)
      step = -ldlt.solve(cur.gradient);
    else
      step = -hess.completeOrthogonalDecomposition().solve(cur.gradient);
    if (!step.allFinite()) break;
    double s = 1.0;
    DualState next;
    Eigen::VectorXd candidate;
    bool accepted = false;
    const double slope = cur.gradient.dot(step);
    for (int h = 0; h < 40; ++h, s *= 0.5) {
      candidate = lambda + s * step;
      next = dual(d, candidate);
      if (std::isfinite(next.value) && next.value <= cur.value + 1e-4 * s * slope + 1e-15 * std::abs(cur.value)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double next_norm = next.gradient.lpNorm<Eigen::Infinity>();
    if (converged && next_norm >= norm) break;
    lambda = candidate;
    cur = std::move(next);
    best_norm = std::min(best_norm, next_norm);
  }

  if (!converged) {
    std::ostringstream msg;
    msg << "calibration solver diverged after " << iter << " iterations; standardized residual " << best_norm
        << ", max weight " << cur.weights.maxCoeff();
    throw NumericalError(msg.str());
  }

  for (Eigen::Index a = 0; a < q; ++a) {
    const Eigen::Index c = active[static_cast<std::size_t>(a)];
    out.lambda(c) = lambda(a) / scale(c);
  }
  out.eta = -out.lambda;
  out.weights = cur.weights;
  out.iterations = iter;
  out.residual = k > 0 ? (g.transpose() * out.weights - spec.target_moments).lpNorm<Eigen::Infinity>() : 0.0;
  out.effective_sample_size = 1.0 / out.weights.squaredNorm();
  return out;
}

}  // namespace survtransport
