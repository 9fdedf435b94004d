#include <algorithm>
#include <cmath>
#include <sstream>

#include "survtransport/hare.hpp"

namespace survtransport {

double HareFactor::eval_covariate(const Eigen::VectorXd& x) const {
  const double v = x(static_cast<Eigen::Index>(column));
  switch (kind) {
    case FactorKind::CovariateLinear: return v;
    case FactorKind::CovariateKnot: return v > knot ? v - knot : 0.0;
    default: return 1.0;
  }
}

double HareFactor::eval_time(double t) const {
  switch (kind) {
    case FactorKind::TimeLinear: return t;
    case FactorKind::TimeKnot: return t < knot ? knot - t : 0.0;
    default: return 1.0;
  }
}

const HareFactor* HareTerm::time_factor() const {
  for (const auto& f : factors)
    if (f.is_time()) return &f;
  return nullptr;
}

double HareTerm::covariate_part(const Eigen::VectorXd& x) const {
  double v = 1.0;
  for (const auto& f : factors)
    if (!f.is_time()) v *= f.eval_covariate(x);
  return v;
}

double HareTerm::time_part(double t) const {
  const HareFactor* f = time_factor();
  return f ? f->eval_time(t) : 1.0;
}

namespace {

std::string factor_label(const HareFactor& f, std::span<const std::string> names) {
  const std::string var = f.column < names.size() ? names[f.column] : "x" + std::to_string(f.column);
  std::ostringstream out;
  out.precision(6);
  switch (f.kind) {
    case FactorKind::CovariateLinear: out << var; break;
    case FactorKind::CovariateKnot: out << "(" << var << "-" << f.knot << ")+"; break;
    case FactorKind::TimeLinear: out << "t"; break;
    case FactorKind::TimeKnot: out << "(" << f.knot << "-t)+"; break;
  }
  return out.str();
}

bool factor_less(const HareFactor& a, const HareFactor& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.column != b.column) return a.column < b.column;
  return a.knot < b.knot;
}

}  // namespace

std::string HareTerm::label(std::span<const std::string> names) const {
  if (factors.empty()) return "1";
  std::string out;
  for (const auto& f : factors) {
    if (!out.empty()) out += "*";
    out += factor_label(f, names);
  }
  return out;
}

bool operator==(const HareTerm& a, const HareTerm& b) {
  if (a.factors.size() != b.factors.size()) return false;
  auto fa = a.factors, fb = b.factors;
  std::sort(fa.begin(), fa.end(), factor_less);
  std::sort(fb.begin(), fb.end(), factor_less);
  return fa == fb;
}

bool HareBasis::contains(const HareTerm& term) const {
  return std::find(terms.begin(), terms.end(), term) != terms.end();
}

bool HareBasis::has_time_knot() const {
  return std::any_of(terms.begin(), terms.end(), [](const HareTerm& t) {
    const HareFactor* f = t.time_factor();
    return f && f->kind == FactorKind::TimeKnot;
  });
}

bool HareBasis::has_covariate_time_interaction() const {
  return std::any_of(terms.begin(), terms.end(),
                     [](const HareTerm& t) { return t.time_factor() && t.factors.size() > 1; });
}

std::vector<double> HareBasis::time_knots() const {
  std::vector<double> knots;
  for (const auto& t : terms)
    if (const HareFactor* f = t.time_factor(); f && f->kind == FactorKind::TimeKnot) knots.push_back(f->knot);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  return knots;
}

std::vector<double> HareBasis::covariate_knots(std::size_t column) const {
  std::vector<double> knots;
  for (const auto& t : terms)
    for (const auto& f : t.factors)
      if (f.kind == FactorKind::CovariateKnot && f.column == column) knots.push_back(f.knot);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  return knots;
}

std::vector<double> HareBasis::segment_starts() const {
  std::vector<double> starts{0.0};
  for (double k : time_knots())
    if (k > 0.0) starts.push_back(k);
  return starts;
}

HareBasis hare_start_basis(std::span<const std::size_t> columns) {
  HareBasis basis;
  basis.terms.push_back({});
  basis.terms.push_back({{HareFactor{FactorKind::TimeLinear, 0, 0.0}}});
  for (std::size_t c : columns) basis.terms.push_back({{HareFactor{FactorKind::CovariateLinear, c, 0.0}}});
  return basis;
}

double exp_linear_integral(double a, double b, double lo, double hi) {
  const double h = hi - lo;
  if (!(h > 0.0)) return 0.0;
  const double c = b * h;
  const double scale = std::exp(a + b * lo) * h;
  if (std::abs(c) < 1e-8) return scale * (1.0 + c / 2.0 + c * c / 6.0);
  return scale * std::expm1(c) / c;
}

void HareFit::segment_coefficients(const Eigen::VectorXd& x, std::vector<double>& a, std::vector<double>& b) const {
  const std::vector<double> starts = basis.segment_starts();
  a.assign(starts.size(), 0.0);
  b.assign(starts.size(), 0.0);
  for (std::size_t k = 0; k < basis.terms.size(); ++k) {
    const HareTerm& term = basis.terms[k];
    const double c = coefficients(static_cast<Eigen::Index>(k)) * term.covariate_part(x);
    if (c == 0.0) continue;
    const HareFactor* f = term.time_factor();
    for (std::size_t s = 0; s < starts.size(); ++s) {
      if (!f) {
        a[s] += c;
      } else if (f->kind == FactorKind::TimeLinear) {
        b[s] += c;
      } else if (starts[s] < f->knot) {
        a[s] += c * f->knot;
        b[s] -= c;
      }
    }
  }
}

double HareFit::log_hazard(const Eigen::VectorXd& x, double t) const {
  double v = 0.0;
  for (std::size_t k = 0; k < basis.terms.size(); ++k)
    v += coefficients(static_cast<Eigen::Index>(k)) * basis.terms[k].eval(x, t);
  return v;
}

double HareFit::cumulative_hazard(const Eigen::VectorXd& x, double t) const {
  if (!(t > 0.0)) return 0.0;
  const std::vector<double> starts = basis.segment_starts();
  std::vector<double> a, b;
  segment_coefficients(x, a, b);
  double total = 0.0;
  for (std::size_t s = 0; s < starts.size() && starts[s] < t; ++s) {
    const double hi = s + 1 < starts.size() ? std::min(t, starts[s + 1]) : t;
    total += exp_linear_integral(a[s], b[s], starts[s], hi);
  }
  return total;
}

double cumulative_hazard(const HareFit& fit, const Eigen::VectorXd& x, double t) {
  return fit.cumulative_hazard(x, t);
}

double conditional_survival_hare(const HareFit& fit, const Eigen::VectorXd& x, double t) {
  return std::exp(-fit.cumulative_hazard(x, t));
}

}  // namespace survtransport
