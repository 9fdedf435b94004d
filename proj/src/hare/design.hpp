#pragma once

#include <vector>

#include <Eigen/Dense>

#include "survtransport/hare.hpp"

namespace survtransport::hare_detail {

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;  // negative Hessian
};

// Records sorted by time with the covariate part of every term precomputed.
// On time segment [lo, hi) term k contributes c_ik (alpha_k + gamma_k u).
struct Design {
  struct Segment {
    double lo = 0.0;
    double hi = 0.0;
    Eigen::VectorXd alpha;
    Eigen::VectorXd gamma;
    bool has_slope = false;
    Eigen::Index row_start = 0;  // first row with time > lo
  };

  HareBasis basis;
  Eigen::MatrixXd c;
  Eigen::VectorXd time;
  Eigen::VectorXd event_sum;  // sum over events of B_k(U_i | X_i)
  std::size_t events = 0;
  std::vector<Segment> segments;

  Design(RecordSpan records, const HareBasis& basis);
  Evaluation evaluate(const Eigen::VectorXd& beta, bool derivatives) const;
};

}  // namespace survtransport::hare_detail
