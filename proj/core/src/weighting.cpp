#include "cbench/weighting.hpp"

#include <cmath>

#include "cbench/error.hpp"
#include "cbench/linear_model.hpp"
#include "cbench/stats.hpp"

namespace cbench {

WeightVector make_weights(const Eigen::VectorXd& z, const Eigen::VectorXd& e, Estimand estimand,
                          const WeightOptions& options) {
  require(z.size() == e.size(), "DomainError", "make_weights: length mismatch");
  const int n = static_cast<int>(z.size());
  Eigen::VectorXd scores(n);
  for (int i = 0; i < n; ++i) {
    require(e[i] > 0.0 && e[i] < 1.0, "DomainError", "propensity scores must lie in (0,1)");
    if (e[i] < options.truncate_lo || e[i] > options.truncate_hi) {
      require(options.truncate, "ExtremePropensity",
              "score " + std::to_string(e[i]) + " outside truncation bounds at row " +
                  std::to_string(i));
      scores[i] = std::min(options.truncate_hi, std::max(options.truncate_lo, e[i]));
    } else {
      scores[i] = e[i];
    }
  }

  WeightVector out;
  out.estimand = estimand;
  out.normalized = options.normalize;
  out.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    if (estimand == Estimand::ATE) {
      out.weights[i] = z[i] == 1.0 ? 1.0 / scores[i] : 1.0 / (1.0 - scores[i]);
    } else {
      out.weights[i] = z[i] == 1.0 ? 1.0 : scores[i] / (1.0 - scores[i]);
    }
  }
  if (options.normalize) {
    double st = 0.0, sc = 0.0;
    for (int i = 0; i < n; ++i) (z[i] == 1.0 ? st : sc) += out.weights[i];
    require(st > 0.0 && sc > 0.0, "DegenerateArm", "one arm has zero total weight");
    for (int i = 0; i < n; ++i) out.weights[i] /= (z[i] == 1.0 ? st : sc);
  }
  return out;
}

EffectEstimate ipw_estimate(const Dataset& d, const std::string& outcome, const WeightVector& w) {
  require(w.weights.size() == d.n(), "DomainError", "ipw_estimate: weights length mismatch");
  const Eigen::VectorXd y = d.outcome(outcome);

  double sw_t = 0.0, sw_c = 0.0, sy_t = 0.0, sy_c = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    if (d.z(i) == 1) {
      sw_t += w.weights[i];
      sy_t += w.weights[i] * y[i];
    } else {
      sw_c += w.weights[i];
      sy_c += w.weights[i] * y[i];
    }
  }
  require(sw_t > 0.0 && sw_c > 0.0, "DegenerateArm", "both arms need positive total weight");
  const double mu_t = sy_t / sw_t;
  const double mu_c = sy_c / sw_c;

  // Linearized variance of each weighted mean: sum w^2 (y - mu)^2 / (sum w)^2.
  double var_t = 0.0, var_c = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    if (d.z(i) == 1) {
      var_t += w.weights[i] * w.weights[i] * (y[i] - mu_t) * (y[i] - mu_t);
    } else {
      var_c += w.weights[i] * w.weights[i] * (y[i] - mu_c) * (y[i] - mu_c);
    }
  }
  var_t /= sw_t * sw_t;
  var_c /= sw_c * sw_c;

  EffectEstimate e;
  e.method_id = "ipw";
  e.estimand = w.estimand;
  e.tau = mu_t - mu_c;
  e.se = std::sqrt(var_t + var_c);
  set_normal_ci(e);
  e.n_used = d.n();
  return e;
}

EffectEstimate aipw_estimate(const Dataset& d, const std::string& outcome,
                             const Eigen::VectorXd& e, const Eigen::VectorXd& mu1,
                             const Eigen::VectorXd& mu0, Estimand estimand) {
  const int n = d.n();
  require(e.size() == n && mu1.size() == n && mu0.size() == n, "DomainError",
          "aipw_estimate: input length mismatch");
  const Eigen::VectorXd y = d.outcome(outcome);

  Eigen::VectorXd summand(n);
  if (estimand == Estimand::ATE) {
    for (int i = 0; i < n; ++i) {
      require(e[i] > 0.0 && e[i] < 1.0, "DomainError", "propensity scores must lie in (0,1)");
      const double z = d.z(i);
      summand[i] = mu1[i] - mu0[i] + z * (y[i] - mu1[i]) / e[i] -
                   (1.0 - z) * (y[i] - mu0[i]) / (1.0 - e[i]);
    }
  } else {
    const double pz = d.treatment().mean();
    require(pz > 0.0, "DegenerateArm", "aipw ATT needs treated units");
    for (int i = 0; i < n; ++i) {
      require(e[i] > 0.0 && e[i] < 1.0, "DomainError", "propensity scores must lie in (0,1)");
      const double z = d.z(i);
      summand[i] = (z * (y[i] - mu0[i]) -
                    (1.0 - z) * e[i] / (1.0 - e[i]) * (y[i] - mu0[i])) /
                   pz;
    }
  }

  EffectEstimate out;
  out.method_id = "aipw";
  out.estimand = estimand;
  out.tau = summand.mean();
  std::vector<double> s(summand.data(), summand.data() + n);
  out.se = sample_sd(s) / std::sqrt(static_cast<double>(n));
  set_normal_ci(out);
  out.n_used = n;
  return out;
}

EffectEstimate ipw_regression_estimate(const Dataset& d, const std::string& outcome,
                                       const WeightVector& w) {
  require(w.weights.size() == d.n(), "DomainError", "weights length mismatch");
  const int n = d.n();
  const int p = d.n_covariates();
  const Eigen::VectorXd y = d.outcome(outcome);
  Eigen::MatrixXd design(n, p + 1);
  design.col(0) = d.treatment();
  design.rightCols(p) = d.covariates();

  const LinearModel fit = fit_ols(design, y, w.weights);
  require(!fit.ridge_fallback, "RankDeficient", "weighted regression design is rank deficient");

  EffectEstimate e;
  e.method_id = "ipwra";
  e.estimand = w.estimand;
  e.tau = fit.coefficients[1];
  e.se = std::sqrt(std::max(0.0, fit.vcov(1, 1)));
  set_normal_ci(e);
  e.n_used = n;
  return e;
}

}  // namespace cbench
