#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace survtransport {

enum class Source { Trial, External };

// One individual's observed data. External records carry covariates (and a
// design weight) only; their time, event and arm fields are ignored.
struct SubjectRecord {
  double time = 0.0;
  bool event = false;  // true when the event (not censoring) was observed
  int arm = 0;         // 1 = experimental arm
  Eigen::VectorXd covariates;
  Source source = Source::Trial;
  double design_weight = 1.0;

  bool is_trial() const { return source == Source::Trial; }
  bool is_external() const { return source == Source::External; }
};

using Records = std::vector<SubjectRecord>;
using RecordSpan = std::span<const SubjectRecord>;

// Aligned trial and external samples sharing one covariate layout.
struct StudyData {
  Records trial;
  Records external;
  std::vector<std::string> covariate_names;
};

// Rows = records, columns = the selected covariate indices (all when empty).
Eigen::MatrixXd covariate_matrix(RecordSpan records,
                                 std::span<const std::size_t> columns = {});

Records filter_arm(RecordSpan records, int arm);

// Subset of `candidates` (all columns when empty) that take more than one
// value in `records`.
std::vector<std::size_t> varying_columns(RecordSpan records, std::span<const std::size_t> candidates = {});

// Throws ValidationError when a trial record is malformed (negative time,
// arm outside {0,1}, non-unit design weight) or covariate sizes disagree.
void validate_trial(RecordSpan records);
void validate_external(RecordSpan records);

}  // namespace survtransport
