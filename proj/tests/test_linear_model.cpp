#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cbench/error.hpp"
#include "cbench/linear_model.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"

using namespace cbench;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const std::vector<int>& z) {
  const int n = static_cast<int>(x.rows());
  std::vector<CovariateSchema> schema;
  std::vector<DataColumn> columns;
  for (int j = 0; j < x.cols(); ++j) {
    const std::string name = "x" + std::to_string(j);
    schema.push_back({name, ColumnKind::continuous, 0, ColumnRole::covariate, {}});
    columns.push_back({name, name, ColumnRole::covariate});
  }
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<Arm> arms(static_cast<std::size_t>(n), Arm::NRS);
  Eigen::MatrixXd ymat(n, 1);
  ymat.col(0) = y;
  return Dataset(schema, columns, {"y_out"}, ids, arms, z, x, ymat);
}

}  // namespace

TEST_CASE("ols recovers exact coefficients on noiseless data") {
  Rng rng(17);
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = 1.0 + 3.0 * x(i, 0) - 2.0 * x(i, 1);
  }
  const LinearModel fit = fit_ols(x, y);
  CHECK(fit.coefficients[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fit.coefficients[1] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(fit.coefficients[2] == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK_FALSE(fit.ridge_fallback);

  // Simple slope: y = 2x with zero residuals.
  Eigen::MatrixXd x1(4, 1);
  x1 << 1, 2, 3, 5;
  Eigen::VectorXd y1(4);
  y1 << 2, 4, 6, 10;
  const LinearModel slope = fit_ols(x1, y1);
  CHECK(slope.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(slope.sigma2 == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("duplicate column triggers the ridge fallback flag") {
  Eigen::MatrixXd x(8, 2);
  Eigen::VectorXd y(8);
  Rng rng(2);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = x(i, 0);
    y[i] = x(i, 0) + rng.normal();
  }
  const LinearModel fit = fit_ols(x, y);
  CHECK(fit.ridge_fallback);
}

TEST_CASE("HC2 equals classical vcov under equal leverage and equal-magnitude residuals") {
  // Balanced two-group design; residuals alternate +d/-d within groups, so
  // they are orthogonal to the design and have constant magnitude.
  const int n = 8;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  const double delta = 0.5;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i < n / 2 ? 0.0 : 1.0;
    const double base = i < n / 2 ? 1.0 : 3.0;
    y[i] = base + (i % 2 == 0 ? delta : -delta);
  }
  const LinearModel fit = fit_ols(x, y);
  Eigen::MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = x.col(0);
  const Eigen::MatrixXd classical = fit.sigma2 * (design.transpose() * design).inverse();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      CHECK(fit.vcov(a, b) == doctest::Approx(classical(a, b)).epsilon(1e-8));
    }
  }
}

TEST_CASE("predictions are invariant to affine covariate reparameterization") {
  Rng rng(19);
  const int n = 80;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = 0.4 + 1.1 * x(i, 0) - 0.6 * x(i, 1) + 0.3 * rng.normal();
  }
  const LinearModel base = fit_ols(x, y);
  Eigen::MatrixXd x2 = x;
  x2.col(0) = 3.0 * x.col(0).array() - 5.0;
  x2.col(1) = -0.5 * x.col(1).array() + 2.0;
  const LinearModel reparam = fit_ols(x2, y);
  CHECK((base.predict(x) - reparam.predict(x2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("weighted least squares matches replication") {
  // Integer weights equal replicating rows.
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  Eigen::VectorXd y(3);
  y << 1.0, 2.2, 2.8;
  Eigen::VectorXd w(3);
  w << 1, 2, 1;
  const LinearModel weighted = fit_ols(x, y, w);

  Eigen::MatrixXd xr(4, 1);
  xr << 0, 1, 1, 2;
  Eigen::VectorXd yr(4);
  yr << 1.0, 2.2, 2.2, 2.8;
  const LinearModel replicated = fit_ols(xr, yr);
  CHECK(weighted.coefficients[0] ==
        doctest::Approx(replicated.coefficients[0]).epsilon(1e-10));
  CHECK(weighted.coefficients[1] ==
        doctest::Approx(replicated.coefficients[1]).epsilon(1e-10));
}

TEST_CASE("regression adjustment recovers analytic effects") {
  Rng rng(23);
  const int n = 400;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  // Treated x centered at 1, control at 0; y = 2z + x + zx exactly.
  for (int i = 0; i < n; ++i) {
    const bool treated = i < n / 2;
    z[static_cast<std::size_t>(i)] = treated ? 1 : 0;
    x(i, 0) = rng.normal() + (treated ? 1.0 : 0.0);
    y[i] = 2.0 * z[static_cast<std::size_t>(i)] + x(i, 0) +
           z[static_cast<std::size_t>(i)] * x(i, 0);
  }
  // Force the treated sample mean of x to exactly 1.
  double mt = 0.0;
  for (int i = 0; i < n / 2; ++i) mt += x(i, 0);
  mt /= n / 2;
  for (int i = 0; i < n / 2; ++i) {
    x(i, 0) += 1.0 - mt;
    y[i] = 2.0 + 2.0 * x(i, 0);
  }
  const Dataset d = make_dataset(x, y, z);
  const EffectEstimate att = regression_adjustment(d, "y_out", Estimand::ATT);
  CHECK(att.tau == doctest::Approx(3.0).epsilon(1e-8));

  // Identical arms: effect 0.
  Eigen::MatrixXd x0(40, 1);
  Eigen::VectorXd y0(40);
  std::vector<int> z0(40);
  for (int i = 0; i < 40; ++i) {
    x0(i, 0) = (i % 20) * 0.1;
    y0[i] = 1.0 + x0(i, 0);
    z0[static_cast<std::size_t>(i)] = i < 20 ? 1 : 0;
  }
  const Dataset d0 = make_dataset(x0, y0, z0);
  CHECK(regression_adjustment(d0, "y_out", Estimand::ATE).tau ==
        doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("pooled additive-z model is reproduced by g-computation") {
  // With a pooled truth that is additive in z and x, the per-arm fits agree
  // and tau equals the z coefficient of the pooled regression.
  Rng rng(31);
  const int n = 300;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    z[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    x(i, 0) = rng.normal();
    y[i] = 0.5 + 1.7 * z[static_cast<std::size_t>(i)] - 0.8 * x(i, 0);
  }
  const Dataset d = make_dataset(x, y, z);
  const EffectEstimate ate = regression_adjustment(d, "y_out", Estimand::ATE);
  CHECK(ate.tau == doctest::Approx(1.7).epsilon(1e-8));

  const EffectEstimate with_se =
      regression_adjustment_with_bootstrap(d, "y_out", Estimand::ATE, 200, 7);
  CHECK(with_se.se > 0.0);
  CHECK(with_se.ci_lo < 1.7);
  CHECK(with_se.ci_hi > 1.7);
}

TEST_CASE("regression adjustment coverage over repeated draws") {
  // Linear truth; the bootstrap CI should cover the true ATE most of the time.
  int covered = 0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(1000 + rep);
    const int n = 300;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    std::vector<int> z(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      z[static_cast<std::size_t>(i)] = rng.bernoulli(expit(0.5 * x(i, 0))) ? 1 : 0;
      y[i] = 0.5 * x(i, 0) - 0.3 * x(i, 1) + 1.0 * z[static_cast<std::size_t>(i)] +
             rng.normal();
    }
    const Dataset d = make_dataset(x, y, z);
    const EffectEstimate e =
        regression_adjustment_with_bootstrap(d, "y_out", Estimand::ATE, 120, 5 + rep);
    if (e.ci_lo <= 1.0 && 1.0 <= e.ci_hi) ++covered;
  }
  CHECK(covered >= 33);  // ~95% nominal; binomial slack for 40 draws
}
