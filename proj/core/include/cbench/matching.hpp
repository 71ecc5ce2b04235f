#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbench/data.hpp"
#include "cbench/effect.hpp"

namespace cbench {

enum class DistanceMetric { pscore_abs_diff, pscore_linear, mahalanobis };

struct Caliper {
  // Width in multiples of the sd of the logit propensity score, pooled over
  // all units. Pairs beyond the caliper get +inf distance.
  double width = 0.2;
};

struct DistanceSpec {
  DistanceMetric metric = DistanceMetric::pscore_abs_diff;
  std::optional<Caliper> caliper;
  // Center indicators are excluded from the Mahalanobis metric by default:
  // near-collinear indicator blocks destabilize the covariance inverse.
  bool include_center_indicators = false;
};

// Treated-by-control distance matrix plus the dataset rows backing each axis.
struct DistanceMatrix {
  Eigen::MatrixXd d;
  std::vector<int> treated_rows;
  std::vector<int> control_rows;
};

// pscore metrics require e (one score per dataset row). Mahalanobis uses the
// pooled within-group covariance, ridge-repaired if near-singular; throws
// SingularCovariance when repair fails.
DistanceMatrix distance_matrix(const Dataset& d, const DistanceSpec& spec,
                               const Eigen::VectorXd* pscores = nullptr);

// Low-level pairing of matrix rows to columns.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col)
  std::vector<int> unmatched_rows;
  double objective = 0.0;
};

enum class GreedyOrder { data_order, largest_pscore_first };

// Each row, in the given order, takes the nearest still-unused column with a
// finite distance; ties break toward the lowest column index.
Assignment greedy_nn_match(const Eigen::MatrixXd& D, GreedyOrder order = GreedyOrder::data_order,
                           const Eigen::VectorXd* treated_pscores = nullptr);

// Minimum-cost assignment via successive shortest augmenting paths. Matches
// as many rows as the finite entries allow; among maximum-cardinality
// matchings the total distance is minimal.
Assignment optimal_pair_match(const Eigen::MatrixXd& D);

struct MatchedPair {
  std::int64_t treated_id = 0;
  std::int64_t control_id = 0;
  double distance = 0.0;
};

// Id-level match result.
struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<std::int64_t> unmatched_treated;
  double objective = 0.0;
  std::vector<std::string> flags;
};

MatchResult to_match_result(const Assignment& a, const DistanceMatrix& dm, const Dataset& d);

struct BalanceConstraint {
  std::string covariate;
  double max_abs_std_diff = 0.1;
};

struct CardinalityConfig {
  double time_limit_seconds = 10.0;
  // Safety valve for the exact search; hitting it is reported like a timeout.
  std::int64_t max_nodes = 50'000'000;
};

// Largest subset pairing whose selected groups meet every balance constraint
// (|sum_T x - sum_C x| <= threshold * sd * m per covariate), found by
// best-first branch and bound; the selected units are then paired by an
// optimal Mahalanobis match. Throws Infeasible when no nonempty subset
// qualifies; a timeout returns the best incumbent with a TimeLimit flag.
MatchResult cardinality_match(const Dataset& d, const std::vector<BalanceConstraint>& constraints,
                              const CardinalityConfig& config = {});

// Mean of treated-minus-control outcome differences over pairs, with
// se = sd(differences)/sqrt(#pairs) and a 1.96 normal interval.
EffectEstimate matched_pair_estimate(const MatchResult& match, const Dataset& d,
                                     const std::string& outcome);

// Linear model of y on (z, X) over the matched sample only; the z coefficient
// with its HC2 standard error.
EffectEstimate bias_corrected_estimate(const MatchResult& match, const Dataset& d,
                                       const std::string& outcome);

// Rows of the matched sample (treated and control of every pair).
std::vector<int> matched_sample_rows(const MatchResult& match, const Dataset& d);

// 0/1 inclusion weights for the matched sample, for balance audits.
std::vector<double> matched_sample_weights(const MatchResult& match, const Dataset& d);

}  // namespace cbench
