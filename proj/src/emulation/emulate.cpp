#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "survtransport/emulation.hpp"
#include "survtransport/error.hpp"
#include "survtransport/stats.hpp"

namespace survtransport {

std::string EmulatedSample::label(std::size_t row, std::size_t column) const {
  const double v = values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(column));
  if (const auto& cat = categories[column]) return cat->levels[static_cast<std::size_t>(v)];
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::pair<double, double> shifted_beta_parameters(const std::string& name, const ContinuousMargin& margin) {
  if (!margin.lo || !margin.hi)
    throw ValidationError("emulation: variable '" + name + "' has no range; set lo/hi or supply trial data");
  const double width = *margin.hi - *margin.lo;
  const double mu = (margin.mean - *margin.lo) / width;
  const double var = margin.sd * margin.sd / (width * width);
  const double bound = mu * (1.0 - mu);
  if (!(mu > 0.0 && mu < 1.0) || !(var < bound)) {
    std::ostringstream msg;
    msg << "emulation: variable '" << name << "' has infeasible beta moments: scaled variance " << var
        << " must be below mu*(1-mu) = " << bound << " (mean " << margin.mean << ", sd " << margin.sd
        << ", range [" << *margin.lo << ", " << *margin.hi << "])";
    throw ValidationError(msg.str());
  }
  const double k = bound / var - 1.0;
  return {mu * k, (1.0 - mu) * k};
}

EmulatedSample emulate_sample(const SummarySpec& spec, const CopulaSpec& copula, std::size_t m, std::uint64_t seed) {
  EmulatedSample out;
  std::vector<const VariableSummary*> vars;
  for (const auto& v : spec.variables)
    if (!v.absent) vars.push_back(&v);
  const auto p = static_cast<Eigen::Index>(vars.size());

  // Latent correlation restricted to the emulated variables; variables the
  // copula does not know are independent of the rest.
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) {
      const auto ia = copula.index(vars[static_cast<std::size_t>(a)]->name);
      const auto ib = copula.index(vars[static_cast<std::size_t>(b)]->name);
      if (a != b && ia && ib)
        r(a, b) = copula.correlation(static_cast<Eigen::Index>(*ia), static_cast<Eigen::Index>(*ib));
    }
  repair_correlation(r);
  Eigen::MatrixXd factor;
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::vector<std::pair<double, double>> beta(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    out.names.push_back(vars[k]->name);
    if (const auto* cat = std::get_if<CategoricalMargin>(&vars[k]->margin)) {
      out.categories.push_back(*cat);
    } else {
      out.categories.push_back(std::nullopt);
      beta[k] = shifted_beta_parameters(vars[k]->name, std::get<ContinuousMargin>(vars[k]->margin));
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  out.values.resize(static_cast<Eigen::Index>(m), p);
  Eigen::VectorXd eps(p);
  for (std::size_t i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) eps(k) = normal(rng);
    const Eigen::VectorXd z = factor * eps;
    for (Eigen::Index k = 0; k < p; ++k) {
      const double u = std::clamp(stats::normal_cdf(z(k)), 1e-15, 1.0 - 1e-15);
      const auto vk = static_cast<std::size_t>(k);
      double value;
      if (const auto& cat = out.categories[vk]) {
        std::size_t level = 0;
        double cum = cat->proportions[0];
        while (level + 1 < cat->proportions.size() && u > cum) cum += cat->proportions[++level];
        value = static_cast<double>(level);
      } else {
        const auto& c = std::get<ContinuousMargin>(vars[vk]->margin);
        value = *c.lo + (*c.hi - *c.lo) * boost::math::ibeta_inv(beta[vk].first, beta[vk].second, u);
      }
      out.values(static_cast<Eigen::Index>(i), k) = value;
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace survtransport
