#include "cbench/linear_model.hpp"

#include <algorithm>
#include <cmath>

#include "cbench/error.hpp"
#include "cbench/stats.hpp"

namespace cbench {

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  require(X.cols() + 1 == coefficients.size(), "ArityMismatch",
          "prediction design has wrong column count");
  return Eigen::VectorXd::Constant(X.rows(), coefficients[0]) + X * coefficients.tail(X.cols());
}

LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::optional<Eigen::VectorXd>& weights) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols()) + 1;
  require(y.size() == n, "DomainError", "fit_ols: y length mismatch");
  require(n > p, "TooFewUnits", "fit_ols needs n > p");

  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(X.cols()) = X;

  Eigen::VectorXd sw;  // sqrt weights
  if (weights) {
    require(weights->size() == n, "DomainError", "fit_ols: weights length mismatch");
    require((weights->array() >= 0.0).all(), "DomainError", "fit_ols: negative weight");
    sw = weights->array().sqrt();
  } else {
    sw = Eigen::VectorXd::Ones(n);
  }
  const Eigen::MatrixXd Xw = sw.asDiagonal() * design;
  const Eigen::VectorXd yw = sw.asDiagonal() * y;

  LinearModel model;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() == p) {
    model.coefficients = qr.solve(yw);
  } else {
    // Ridge fallback on the normal equations; flag it so callers can tell.
    const double ridge = 1e-10 * std::max(1.0, Xw.squaredNorm() / n);
    Eigen::MatrixXd gram = Xw.transpose() * Xw;
    gram.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    require(ldlt.info() == Eigen::Success, "RankDeficient",
            "design is rank deficient beyond ridge repair");
    model.coefficients = ldlt.solve(Xw.transpose() * yw);
    model.ridge_fallback = true;
    require(model.coefficients.allFinite(), "RankDeficient", "ridge fallback failed");
  }

  const Eigen::VectorXd resid = yw - Xw * model.coefficients;
  model.sigma2 = resid.squaredNorm() / std::max(1, n - p);

  // HC2 on the (weight-transformed) regression: meat = X' diag(e^2/(1-h)) X.
  const Eigen::MatrixXd gram_inv = [&]() {
    Eigen::MatrixXd gram = Xw.transpose() * Xw;
    if (model.ridge_fallback) gram.diagonal().array() += 1e-10 * std::max(1.0, Xw.squaredNorm() / n);
    return Eigen::MatrixXd(gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p)));
  }();
  Eigen::VectorXd omega(n);
  for (int i = 0; i < n; ++i) {
    const double h = Xw.row(i) * gram_inv * Xw.row(i).transpose();
    const double adj = std::max(1.0 - h, 1e-12);
    omega[i] = resid[i] * resid[i] / adj;
  }
  model.vcov = gram_inv * (Xw.transpose() * omega.asDiagonal() * Xw) * gram_inv;
  return model;
}

namespace {

// Per-arm design matrices, excluding the treatment column itself.
struct ArmSplit {
  Eigen::MatrixXd x_t, x_c;
  Eigen::VectorXd y_t, y_c;
  std::vector<int> treated, control;
};

ArmSplit split_by_treatment(const Dataset& d, const std::string& outcome) {
  ArmSplit s;
  s.treated = d.treated_indices();
  s.control = d.control_indices();
  require(!s.treated.empty() && !s.control.empty(), "DegenerateArm",
          "need both treated and control units");
  const Eigen::VectorXd y = d.outcome(outcome);
  const Eigen::MatrixXd& x = d.covariates();
  s.x_t.resize(static_cast<int>(s.treated.size()), x.cols());
  s.y_t.resize(static_cast<int>(s.treated.size()));
  for (std::size_t i = 0; i < s.treated.size(); ++i) {
    s.x_t.row(static_cast<int>(i)) = x.row(s.treated[i]);
    s.y_t[static_cast<int>(i)] = y[s.treated[i]];
  }
  s.x_c.resize(static_cast<int>(s.control.size()), x.cols());
  s.y_c.resize(static_cast<int>(s.control.size()));
  for (std::size_t i = 0; i < s.control.size(); ++i) {
    s.x_c.row(static_cast<int>(i)) = x.row(s.control[i]);
    s.y_c[static_cast<int>(i)] = y[s.control[i]];
  }
  return s;
}

}  // namespace

EffectEstimate regression_adjustment(const Dataset& d, const std::string& outcome,
                                     Estimand estimand) {
  const ArmSplit s = split_by_treatment(d, outcome);
  const int p = d.n_covariates();
  require(static_cast<int>(s.treated.size()) > p + 2 &&
              static_cast<int>(s.control.size()) > p + 2,
          "TooFewUnits", "regression_adjustment needs n > p + 2 per arm");
  const LinearModel m1 = fit_ols(s.x_t, s.y_t);
  const LinearModel m0 = fit_ols(s.x_c, s.y_c);

  Eigen::MatrixXd target;
  if (estimand == Estimand::ATE) {
    target = d.covariates();
  } else {
    target = s.x_t;
  }
  const Eigen::VectorXd diff = m1.predict(target) - m0.predict(target);

  EffectEstimate e;
  e.method_id = "regadj";
  e.estimand = estimand;
  e.tau = diff.mean();
  e.se = std::numeric_limits<double>::quiet_NaN();
  e.ci_lo = e.ci_hi = e.tau;
  e.n_used = d.n();
  if (m1.ridge_fallback || m0.ridge_fallback) e.flags.push_back("RidgeFallback");
  return e;
}

EffectEstimate regression_adjustment_with_bootstrap(const Dataset& d, const std::string& outcome,
                                                    Estimand estimand, int bootstrap_reps,
                                                    std::uint64_t seed) {
  EffectEstimate e = regression_adjustment(d, outcome, estimand);
  require(bootstrap_reps >= 2, "DomainError", "bootstrap_reps must be >= 2");
  Rng master(seed);
  std::vector<double> taus;
  taus.reserve(static_cast<std::size_t>(bootstrap_reps));
  int failures = 0;
  for (int b = 0; b < bootstrap_reps; ++b) {
    Rng rng = master.derive(static_cast<std::uint64_t>(b));
    std::vector<int> rows(static_cast<std::size_t>(d.n()));
    for (auto& r : rows) r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(d.n())));
    try {
      const Dataset rep = d.subset(rows, /*reassign_ids=*/true);
      taus.push_back(regression_adjustment(rep, outcome, estimand).tau);
    } catch (const Error&) {
      ++failures;
    }
  }
  require(taus.size() >= 2, "MethodFailure", "bootstrap failed in nearly all replicates");
  e.se = sample_sd(taus);
  set_normal_ci(e);
  if (failures > bootstrap_reps / 20) e.flags.push_back("BootstrapFailures");
  return e;
}

}  // namespace cbench
