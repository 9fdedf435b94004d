#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survtransport/estimators.hpp"

namespace survtransport::estimators_detail {

// Records of one arm plus their positions in the full trial sample.
struct ArmSample {
  Records records;
  std::vector<std::size_t> index;
};

ArmSample arm_sample(RecordSpan trial, int arm);

// omega_i / pi_ai over the arm, normalized to sum 1.
Eigen::VectorXd arm_weights(const WeightSet& weights, const ArmSample& sample, int arm, bool ipsw);

// d_j / sum d over the external sample.
Eigen::VectorXd external_weights(RecordSpan external);

// Distinct trial follow-up times up to the horizon, plus the horizon.
std::vector<double> integration_grid(RecordSpan trial, double horizon);

// Running minimum (when requested) and clamping to [0, 1]; adjustments are
// appended to `notes`. S(0) is pinned to 1.
void finalize_curve(SurvivalCurve& curve, bool isotonize, std::vector<std::string>& notes);

}  // namespace survtransport::estimators_detail
