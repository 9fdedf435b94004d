#include <cmath>
#include <numbers>
#include <sstream>

#include "survtransport/emulation.hpp"
#include "survtransport/error.hpp"
#include "survtransport/stats.hpp"

namespace survtransport {

std::optional<std::size_t> CopulaSpec::index(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return k;
  return std::nullopt;
}

bool repair_correlation(Eigen::MatrixXd& r, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
  if (eig.eigenvalues().minCoeff() >= floor) return false;
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd d = fixed.diagonal().cwiseSqrt().cwiseInverse();
  r = d.asDiagonal() * fixed * d.asDiagonal();
  r = 0.5 * (r + r.transpose());
  r.diagonal().setOnes();
  return true;
}

namespace {

double rank_to_latent(double rho) { return 2.0 * std::sin(std::numbers::pi * rho / 6.0); }

void note_repair(CopulaSpec& copula, const std::string& why) {
  if (repair_correlation(copula.correlation))
    copula.notes.push_back("correlation matrix repaired to positive semidefinite (eigenvalue clipping) after " + why);
}

}  // namespace

CopulaSpec independent_copula(std::vector<std::string> names) {
  CopulaSpec c;
  c.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(names.size()),
                                            static_cast<Eigen::Index>(names.size()));
  c.names = std::move(names);
  return c;
}

CopulaSpec estimate_copula(const Eigen::MatrixXd& data, std::vector<std::string> names) {
  const Eigen::Index v = data.cols();
  if (v < 2) throw ValidationError("copula: at least two variables are required");
  if (static_cast<Eigen::Index>(names.size()) != v) throw ValidationError("copula: one name per column required");
  if (data.rows() < 3) throw ValidationError("copula: at least three records are required");
  CopulaSpec c = independent_copula(std::move(names));
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(v));
  for (Eigen::Index j = 0; j < v; ++j) cols[static_cast<std::size_t>(j)].assign(data.col(j).data(), data.col(j).data() + data.rows());
  for (Eigen::Index a = 0; a < v; ++a)
    for (Eigen::Index b = a + 1; b < v; ++b) {
      const double rho = stats::spearman(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
      const double latent = std::isfinite(rho) ? rank_to_latent(rho) : 0.0;
      c.correlation(a, b) = c.correlation(b, a) = latent;
    }
  note_repair(c, "estimation from the trial");
  return c;
}

void set_latent_correlation(CopulaSpec& copula, const std::string& a, const std::string& b, double value) {
  const auto ia = copula.index(a), ib = copula.index(b);
  if (!ia || !ib) throw ValidationError("copula override: unknown variable '" + (ia ? b : a) + "'");
  if (*ia == *ib) throw ValidationError("copula override: a variable cannot be paired with itself");
  if (!(std::abs(value) <= 1.0)) throw ValidationError("copula override: correlation must lie in [-1, 1]");
  const auto i = static_cast<Eigen::Index>(*ia), j = static_cast<Eigen::Index>(*ib);
  copula.correlation(i, j) = copula.correlation(j, i) = value;
  std::ostringstream msg;
  msg << "latent correlation(" << a << ", " << b << ") set to " << value;
  copula.notes.push_back(msg.str());
  note_repair(copula, "override of (" + a + ", " + b + ")");
}

void override_copula(CopulaSpec& copula, const std::string& a, const std::string& b, double rank_correlation) {
  if (!(std::abs(rank_correlation) <= 1.0)) throw ValidationError("copula override: correlation must lie in [-1, 1]");
  set_latent_correlation(copula, a, b, rank_to_latent(rank_correlation));
}

}  // namespace survtransport
