#include "survtransport/records.hpp"

#include <cmath>
#include <string>

#include "survtransport/error.hpp"

namespace survtransport {

Eigen::MatrixXd covariate_matrix(RecordSpan records, std::span<const std::size_t> columns) {
  if (records.empty()) return {};
  const auto width = static_cast<std::size_t>(records.front().covariates.size());
  const std::size_t p = columns.empty() ? width : columns.size();
  Eigen::MatrixXd x(records.size(), p);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& c = records[i].covariates;
    if (static_cast<std::size_t>(c.size()) != width)
      throw ValidationError("record " + std::to_string(i) + " has " + std::to_string(c.size()) +
                            " covariates, expected " + std::to_string(width));
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t col = columns.empty() ? j : columns[j];
      if (col >= width) throw ValidationError("covariate column " + std::to_string(col) + " out of range");
      x(i, j) = c[col];
    }
  }
  return x;
}

Records filter_arm(RecordSpan records, int arm) {
  Records out;
  for (const auto& r : records)
    if (r.is_trial() && r.arm == arm) out.push_back(r);
  return out;
}

std::vector<std::size_t> varying_columns(RecordSpan records, std::span<const std::size_t> candidates) {
  std::vector<std::size_t> out;
  if (records.empty()) return out;
  const auto width = static_cast<std::size_t>(records.front().covariates.size());
  const std::size_t p = candidates.empty() ? width : candidates.size();
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t col = candidates.empty() ? k : candidates[k];
    const auto j = static_cast<Eigen::Index>(col);
    const double first = records.front().covariates(j);
    for (const auto& r : records)
      if (r.covariates(j) != first) {
        out.push_back(col);
        break;
      }
  }
  return out;
}

void validate_trial(RecordSpan records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "trial record " + std::to_string(i);
    if (!r.is_trial()) throw ValidationError(where + " is not flagged as trial");
    if (!(r.time >= 0.0) || !std::isfinite(r.time)) throw ValidationError(where + " has invalid follow-up time");
    if (r.arm != 0 && r.arm != 1) throw ValidationError(where + " has arm outside {0,1}");
    if (r.design_weight != 1.0) throw ValidationError(where + " has a design weight other than 1");
    if (r.covariates.size() != records.front().covariates.size())
      throw ValidationError(where + " has a covariate vector of a different length");
  }
}

void validate_external(RecordSpan records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "external record " + std::to_string(i);
    if (!r.is_external()) throw ValidationError(where + " is not flagged as external");
    if (!(r.design_weight > 0.0) || !std::isfinite(r.design_weight))
      throw ValidationError(where + " has a non-positive design weight");
    if (r.covariates.size() != records.front().covariates.size())
      throw ValidationError(where + " has a covariate vector of a different length");
  }
}

}  // namespace survtransport
