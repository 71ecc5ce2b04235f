#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cbench/effect.hpp"

namespace cbench {

struct TmleResult {
  double psi = 0.0;          // targeted estimate, original outcome units
  double epsilon = 0.0;      // fluctuation coefficient
  double se = 0.0;           // influence-curve standard error
  double initial_psi = 0.0;  // plug-in estimate before targeting
  double scale_lo = 0.0;     // outcome bounds used for the [0,1] rescaling
  double scale_hi = 1.0;
  std::vector<std::string> flags;
};

struct TmleConfig {
  double truncate_lo = 0.01;
  double truncate_hi = 0.99;
  double epsilon_cap = 10.0;  // beyond this the fluctuation is declared divergent
};

// Targeted maximum likelihood update of an initial outcome fit. Outcomes are
// scaled to [0,1]; the clever covariate is z/e - (1-z)/(1-e) for ATE and
// (z - (1-z)e/(1-e)) / Pr(z=1) for ATT; the fluctuation is an intercept-free
// logistic regression of the scaled outcome on the clever covariate with
// offset logit(mu); psi is the mean updated potential-outcome contrast,
// rescaled to original units, with sd(EIF)/sqrt(n) as the standard error.
// A divergent fluctuation falls back to the initial estimate and flags
// NonfiniteFluctuation.
TmleResult tmle(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const Eigen::VectorXd& mu1,
                const Eigen::VectorXd& mu0, const Eigen::VectorXd& e, Estimand estimand,
                const TmleConfig& config = {});

}  // namespace cbench
