#include <cmath>
#include <sstream>

#include "survtransport/error.hpp"
#include "survtransport/weighting.hpp"

namespace survtransport {

namespace {

double log1p_exp(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  if (x.rows() != n) throw ValidationError("logistic: design and outcome sizes differ");
  if (n == 0) throw ValidationError("logistic: empty sample");
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
  const double total = w.sum();
  const double ybar = w.dot(y) / total;
  if (ybar <= 0.0 || ybar >= 1.0) throw SeparationError("logistic: outcome takes a single value (perfect separation)");

  // Standardized design with intercept; constant columns are dropped.
  const Eigen::Index p = x.cols();
  std::vector<Eigen::Index> active;
  Eigen::VectorXd center = Eigen::VectorXd::Zero(p), scale = Eigen::VectorXd::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    center(j) = w.dot(x.col(j)) / total;
    const double var = w.dot((x.col(j).array() - center(j)).square().matrix()) / total;
    scale(j) = std::sqrt(var);
    if (scale(j) > 1e-12 * std::max(1.0, std::abs(center(j)))) active.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(active.size()) + 1;
  Eigen::MatrixXd z(n, q);
  z.col(0).setOnes();
  for (Eigen::Index k = 1; k < q; ++k) {
    const Eigen::Index j = active[static_cast<std::size_t>(k - 1)];
    z.col(k) = (x.col(j).array() - center(j)) / scale(j);
  }

  auto loglik = [&](const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += w(i) * (y(i) * eta(i) - log1p_exp(eta(i)));
    return ll;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  beta(0) = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = z * beta;
  double ll = loglik(eta);
  bool converged = false;
  int iter = 0;
  for (; iter < 100; ++iter) {
    Eigen::VectorXd mu(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = sigmoid(eta(i));
      v(i) = w(i) * mu(i) * (1.0 - mu(i));
    }
    const Eigen::VectorXd grad = z.transpose() * (w.array() * (y - mu).array()).matrix();
    const Eigen::MatrixXd hess = z.transpose() * v.asDiagonal() * z;
    double crit = 0.0;
    for (Eigen::Index k = 0; k < q; ++k)
      crit = std::max(crit, std::abs(grad(k)) / std::sqrt(std::max(hess(k, k), 1e-300)));
    if (crit < 1e-9) {
      converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || hess.diagonal().minCoeff() < 1e-12 * total)
      throw SeparationError("logistic: information matrix degenerate (perfect or quasi-complete separation)");
    const Eigen::VectorXd step = ldlt.solve(grad);
    double s = 1.0;
    Eigen::VectorXd next_beta, next_eta;
    double next_ll = -INFINITY;
    for (int h = 0; h < 30; ++h, s *= 0.5) {
      next_beta = beta + s * step;
      next_eta = z * next_beta;
      next_ll = loglik(next_eta);
      if (next_ll >= ll - 1e-12 * std::abs(ll)) break;
    }
    beta = next_beta;
    eta = next_eta;
    ll = next_ll;
    if (eta.cwiseAbs().maxCoeff() > 35.0)
      throw SeparationError("logistic: fitted probabilities reach 0 or 1 (perfect separation)");
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "logistic: no finite maximum after " << iter << " iterations (separation)";
    throw SeparationError(msg.str());
  }

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p + 1);
  double intercept = beta(0);
  for (Eigen::Index k = 1; k < q; ++k) {
    const Eigen::Index j = active[static_cast<std::size_t>(k - 1)];
    fit.coefficients(j + 1) = beta(k) / scale(j);
    intercept -= beta(k) * center(j) / scale(j);
  }
  fit.coefficients(0) = intercept;
  fit.fitted.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.fitted(i) = sigmoid(eta(i));
  fit.iterations = iter;
  fit.log_likelihood = ll;
  return fit;
}

}  // namespace survtransport
