#pragma once

#include <Eigen/Dense>
#include <optional>

#include "cbench/data.hpp"
#include "cbench/effect.hpp"
#include "cbench/rng.hpp"

namespace cbench {

struct LinearModel {
  // Intercept first, then one slope per design column.
  Eigen::VectorXd coefficients;
  double sigma2 = 0.0;        // residual variance, RSS/(n - p)
  Eigen::MatrixXd vcov;       // HC2 heteroskedasticity-robust
  bool ridge_fallback = false;

  double intercept() const { return coefficients[0]; }
  // Prediction for rows of X (without intercept column).
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Weighted least squares of y on [1, X] with HC2 robust vcov. A rank-deficient
// design falls back to a 1e-10 ridge on the normal equations (flagged); if the
// system is still numerically singular, throws RankDeficient.
LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// g-computation with separate per-arm linear models: tau is the average of
// mu1(x) - mu0(x) over the target population (everyone for ATE, the treated
// for ATT). se is left to the caller: the benchmark harness bootstraps it, or
// use regression_adjustment_with_bootstrap for a standalone estimate.
EffectEstimate regression_adjustment(const Dataset& d, const std::string& outcome,
                                     Estimand estimand);

EffectEstimate regression_adjustment_with_bootstrap(const Dataset& d, const std::string& outcome,
                                                    Estimand estimand, int bootstrap_reps,
                                                    std::uint64_t seed);

}  // namespace cbench
