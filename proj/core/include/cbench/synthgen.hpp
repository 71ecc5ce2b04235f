#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cbench/data.hpp"

namespace cbench {

// One input covariate of the generating process. Categorical columns expand
// to reference-level indicators exactly as load_csv would expand them.
//
// severity_loading correlates the covariate with a shared latent factor
// (marginal moments are unchanged). The published symptom-scale imbalances
// are jointly unreachable for any single selection index over independent
// covariates — the squared index correlations they require sum past 1 — so
// reproducing them needs the scales to co-move the way real symptom scores
// do. Binary and categorical columns load through a latent-threshold draw,
// with categorical levels ordinal in the latent.
struct CovariateSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  double mean = 0.0, sd = 1.0;  // continuous
  double p = 0.5;               // binary
  std::vector<std::string> levels;
  std::vector<double> level_probs;
  ColumnRole role = ColumnRole::covariate;
  double severity_loading = 0.0;  // in (-1, 1)
};

// Linear-index coefficients are per *expanded* column on the standardized
// scale ((x - mean)/sd, indicators centered by their level probability).
struct OutcomeSpec {
  std::string name;  // y_ prefix
  double intercept = 0.0;
  Eigen::VectorXd baseline;
  double treatment_effect = 0.0;
  Eigen::VectorXd interaction;
  bool nonlinear = false;
  Eigen::VectorXd quadratic;  // coefficients on (x~^2 - 1), used when nonlinear
  double noise_sd = 1.0;
  double u_loading = 1.0;  // scales the unobserved confounder in this outcome
};

struct DgpConfig {
  int n_rct = 0;
  int n_nrs = 0;
  std::vector<CovariateSpec> covariates;
  double selection_intercept = 0.0;
  Eigen::VectorXd selection_coefs;  // per expanded column
  std::vector<OutcomeSpec> outcomes;
  double u_strength = 0.0;
  std::uint64_t seed = 0;
};

struct OutcomeTruth {
  double ate = 0.0;
  double att = 0.0;
};

struct Truth {
  std::map<std::string, OutcomeTruth> by_outcome;
};

// Both potential outcomes of an emitted unit, for consistency checks.
struct SynthUnit {
  std::int64_t id = 0;
  Arm arm = Arm::NRS;
  int z = 0;
  std::map<std::string, double> y1;
  std::map<std::string, double> y0;
};

struct GenerateResult {
  Dataset rct;
  Dataset nrs;
  Truth truth;
  std::vector<SynthUnit> potential;  // RCT units first, then NRS
};

// RCT arm assigns z by fair coin; NRS arm self-selects by a logistic model on
// the standardized covariates (plus the unobserved confounder when
// u_strength > 0, which also enters every outcome through its u_loading).
// Emitted y is exactly z*y1 + (1-z)*y0. Truth is analytic when the effect is
// homogeneous, otherwise a 10^6-draw Monte Carlo average over the relevant
// population.
GenerateResult generate(const DgpConfig& cfg);

// Expanded column names for a covariate list, in dataset order.
std::vector<std::string> expanded_column_names(const std::vector<CovariateSpec>& covariates);

struct CalibrationOptions {
  double tol = 0.02;
  int max_sweeps = 30;
  int n_calibration = 100000;
  std::uint64_t seed = 20240001;
  double target_treat_rate = 0.5;
  double bracket = 10.0;  // coefficient search range
};

// Coordinate-wise bisection on the selection coefficients until the generated
// NRS standardized differences hit the targets (keyed by expanded column
// name). Throws Unachievable when a target lies outside what logistic
// selection can produce or the sweeps fail to converge.
Eigen::VectorXd calibrate_to_targets(const DgpConfig& base,
                                     const std::map<std::string, double>& targets,
                                     const CalibrationOptions& options = {});

struct RefluxOptions {
  bool nonlinear_outcomes = false;
  int n_rct = 357;
  int n_nrs = 453;
  double u_strength = 0.0;
  std::uint64_t seed = 1;
};

// Two-arm REFLUX-shaped process: 14 expanded covariate columns with the
// published group moments, selection coefficients pre-calibrated to the
// published NRS standardized differences, and two outcomes on the scales of
// the health-status and quality-of-life endpoints.
DgpConfig reflux_like_preset(const RefluxOptions& options = {});

// The calibration targets the preset was fitted to (expanded column name ->
// standardized difference).
const std::map<std::string, double>& reflux_like_targets();

}  // namespace cbench
