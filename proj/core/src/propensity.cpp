#include "cbench/propensity.hpp"

#include <cmath>

#include "cbench/error.hpp"
#include "cbench/stats.hpp"

namespace cbench {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, double intercept,
                                 const Eigen::VectorXd& beta) {
  return (X * beta).array() + intercept;
}

double deviance(const Eigen::VectorXd& z, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    dev -= 2.0 * (z[i] * std::log(std::max(mu[i], kProbFloor)) +
                  (1.0 - z[i]) * std::log(std::max(1.0 - mu[i], kProbFloor)));
  }
  return dev;
}

}  // namespace

LogisticModel fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                const LogisticConfig& config) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  require(z.size() == n, "DomainError", "fit_logistic_irls: z length mismatch");
  for (int i = 0; i < n; ++i) {
    require(z[i] == 0.0 || z[i] == 1.0, "NonBinaryTreatment",
            "z must be 0/1 at row " + std::to_string(i));
  }
  const double zbar = z.mean();
  require(zbar > 0.0 && zbar < 1.0, "ConstantTreatment", "treatment indicator is constant");

  LogisticModel model;
  model.coefficients = Eigen::VectorXd::Zero(p);
  model.intercept = logit(zbar);  // warm start at the marginal rate

  Eigen::VectorXd beta(p + 1);
  beta[0] = model.intercept;
  beta.tail(p).setZero();

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = X;

  Eigen::VectorXd ridge(p + 1);
  ridge[0] = 0.0;
  ridge.tail(p).setConstant(config.ridge);

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    model.iterations = iter;
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd mu(n), w(n);
    for (int i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
    }
    Eigen::VectorXd score = design.transpose() * (z - mu) - ridge.cwiseProduct(beta);
    model.max_abs_score = score.cwiseAbs().maxCoeff();
    if (model.max_abs_score < config.tol) {
      model.converged = true;
      break;
    }

    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal() += ridge;
    const Eigen::VectorXd delta = hessian.ldlt().solve(score);
    require(delta.allFinite(), "RankDeficient", "IRLS update is not finite");

    // Step-halving keeps the penalized deviance from increasing.
    double step = 1.0;
    const double penalty = 0.5 * (ridge.array() * beta.array().square()).sum();
    const double current = deviance(z, mu) + 2.0 * penalty;
    Eigen::VectorXd candidate;
    for (int h = 0; h < 30; ++h) {
      candidate = beta + step * delta;
      Eigen::VectorXd mu_c(n);
      for (int i = 0; i < n; ++i) mu_c[i] = expit((design.row(i) * candidate)(0, 0));
      const double pen_c = 0.5 * (ridge.array() * candidate.array().square()).sum();
      if (deviance(z, mu_c) + 2.0 * pen_c <= current + 1e-12) break;
      step *= 0.5;
    }
    beta = candidate;

    // Separation: the fit keeps improving toward zero deviance while the
    // coefficients run away.
    const Eigen::VectorXd mu_now =
        (design * beta).unaryExpr([](double v) { return expit(v); });
    const double dev_now = deviance(z, mu_now);
    if (beta.cwiseAbs().maxCoeff() > 30.0 && dev_now < std::max(1e-6 * n, 1e-8)) {
      model.separation = true;
      model.converged = false;
      break;
    }
  }

  model.intercept = beta[0];
  model.coefficients = beta.tail(p);
  {
    Eigen::VectorXd mu(n);
    const Eigen::VectorXd eta = design * beta;
    for (int i = 0; i < n; ++i) mu[i] = expit(eta[i]);
    model.max_abs_score =
        (design.transpose() * (z - mu) - ridge.cwiseProduct(beta)).cwiseAbs().maxCoeff();
    if (!model.separation && model.max_abs_score < config.tol) model.converged = true;
    // The ridge makes a separated fit land at a finite optimum with the
    // deviance collapsed to zero; that is still separation, not convergence.
    if (deviance(z, mu) < 1e-6 * n && beta.tail(p).cwiseAbs().maxCoeff() > 5.0) {
      model.separation = true;
      model.converged = false;
    }
  }
  return model;
}

Eigen::VectorXd predict_propensity(const LogisticModel& m, const Eigen::MatrixXd& X) {
  require(X.cols() == m.coefficients.size(), "ArityMismatch",
          "predict_propensity: design has " + std::to_string(X.cols()) + " columns, model has " +
              std::to_string(m.coefficients.size()));
  Eigen::VectorXd eta = linear_predictor(X, m.intercept, m.coefficients);
  Eigen::VectorXd out(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    out[i] = std::min(1.0 - kProbFloor, std::max(kProbFloor, expit(eta[i])));
  }
  return out;
}

PositivityReport positivity_report(const Eigen::VectorXd& e, double lo, double hi) {
  require(lo < hi, "DomainError", "positivity bounds must satisfy lo < hi");
  PositivityReport r;
  require(e.size() > 0, "DomainError", "positivity_report on empty vector");
  r.min_score = e.minCoeff();
  r.max_score = e.maxCoeff();
  require(r.min_score > 0.0 && r.max_score < 1.0, "DomainError",
          "propensity scores must lie in (0,1)");
  for (int i = 0; i < e.size(); ++i) {
    if (e[i] < lo || e[i] > hi) ++r.violations;
  }
  return r;
}

Eigen::VectorXd truncate_scores(const Eigen::VectorXd& e, double lo, double hi) {
  require(lo < hi, "DomainError", "truncation bounds must satisfy lo < hi");
  return e.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace cbench
