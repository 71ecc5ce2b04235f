#pragma once

#include <Eigen/Dense>

#include "cbench/data.hpp"
#include "cbench/effect.hpp"

namespace cbench {

struct WeightVector {
  Eigen::VectorXd weights;  // one per dataset row
  Estimand estimand = Estimand::ATE;
  bool normalized = true;  // Hajek: weights sum to 1 within each arm
};

struct WeightOptions {
  bool normalize = true;  // raw Horvitz-Thompson weights when false
  bool truncate = true;
  double truncate_lo = 0.01;
  double truncate_hi = 0.99;
};

// ATE: z/e and (1-z)/(1-e); ATT: treated 1, control e/(1-e). With truncation
// disabled, scores outside the truncation bounds raise ExtremePropensity.
WeightVector make_weights(const Eigen::VectorXd& z, const Eigen::VectorXd& e, Estimand estimand,
                          const WeightOptions& options = {});

// Difference of weighted outcome means with a weighted sandwich (linearized
// ratio-estimator) standard error treating e as known.
EffectEstimate ipw_estimate(const Dataset& d, const std::string& outcome, const WeightVector& w);

// Augmented IPW. For the ATE,
//   tau = mean[mu1 - mu0 + z(y-mu1)/e - (1-z)(y-mu0)/(1-e)];
// for the ATT the control residuals are reweighted by e/(1-e) and the
// average runs over Pr(z=1). se from the empirical sd of the unit-level
// summand / sqrt(n). e should already be truncated to (0.01, 0.99).
EffectEstimate aipw_estimate(const Dataset& d, const std::string& outcome,
                             const Eigen::VectorXd& e, const Eigen::VectorXd& mu1,
                             const Eigen::VectorXd& mu0, Estimand estimand = Estimand::ATE);

// Weighted least squares of y on (z, X); z coefficient with HC2 se.
EffectEstimate ipw_regression_estimate(const Dataset& d, const std::string& outcome,
                                       const WeightVector& w);

}  // namespace cbench
