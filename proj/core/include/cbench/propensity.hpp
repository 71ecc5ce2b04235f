#pragma once

#include <Eigen/Dense>

namespace cbench {

struct LogisticConfig {
  double tol = 1e-8;
  int max_iter = 50;
  double ridge = 1e-8;  // slopes only; the intercept is never penalized
};

struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  double max_abs_score = 0.0;  // final penalized score max-norm
};

// Ridge-penalized Bernoulli MLE via iteratively reweighted least squares.
// Convergence means the penalized score X'(z - e) - ridge*beta has max-norm
// below tol. Near-perfect separation (deviance collapsing while coefficients
// diverge) stops early with converged=false and the separation flag set.
LogisticModel fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                const LogisticConfig& config = {});

// Inverse-logit of the linear predictor, clamped to the open interval (0,1).
Eigen::VectorXd predict_propensity(const LogisticModel& m, const Eigen::MatrixXd& X);

struct PositivityReport {
  int violations = 0;
  double min_score = 0.0;
  double max_score = 0.0;
};

PositivityReport positivity_report(const Eigen::VectorXd& e, double lo = 0.01, double hi = 0.99);

// Clamp scores into [lo, hi].
Eigen::VectorXd truncate_scores(const Eigen::VectorXd& e, double lo = 0.01, double hi = 0.99);

}  // namespace cbench
