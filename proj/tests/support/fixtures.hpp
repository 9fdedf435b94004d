#pragma once

#include <vector>

#include "oracles.hpp"
#include "survtransport/estimators.hpp"
#include "survtransport/weighting.hpp"

namespace survtransport::testing {

// Fixed-coefficient Cox model on a single covariate.
CoxFit cox_model(double beta, std::vector<double> times, std::vector<double> values);

// Five arm-1 subjects, two arm-0 subjects, two external records, with
// hand-set weights and nuisance models.
struct SmallInstance {
  Records trial, external;
  WeightSet weights;
  CoxFit outcome;
};
SmallInstance small_instance();

// The arm-1 part of small_instance() in the oracle's explicit form.
oracle::AcwInstance oracle_instance();

}  // namespace survtransport::testing
