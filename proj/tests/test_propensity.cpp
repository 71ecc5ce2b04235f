#include <doctest.h>

#include <cmath>

#include "cbench/error.hpp"
#include "cbench/propensity.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"

using namespace cbench;

namespace {

// Saturated 2x2: x=1 has 30 treated / 10 control, x=0 has 10 treated / 30
// control; the MLE is the cell-frequency closed form.
void make_2x2(Eigen::MatrixXd* x, Eigen::VectorXd* z) {
  const int n = 80;
  x->resize(n, 1);
  z->resize(n);
  int i = 0;
  auto add = [&](double xv, double zv, int count) {
    for (int k = 0; k < count; ++k) {
      (*x)(i, 0) = xv;
      (*z)[i] = zv;
      ++i;
    }
  };
  add(1.0, 1.0, 30);
  add(1.0, 0.0, 10);
  add(0.0, 1.0, 10);
  add(0.0, 0.0, 30);
}

}  // namespace

TEST_CASE("logistic irls matches the saturated 2x2 closed form") {
  Eigen::MatrixXd x;
  Eigen::VectorXd z;
  make_2x2(&x, &z);
  const LogisticModel fit = fit_logistic_irls(x, z);
  CHECK(fit.converged);
  CHECK_FALSE(fit.separation);
  CHECK(fit.intercept == doctest::Approx(std::log(10.0 / 30.0)).epsilon(1e-6));
  CHECK(fit.coefficients[0] ==
        doctest::Approx(std::log((30.0 / 10.0) / (10.0 / 30.0))).epsilon(1e-6));

  // Predictions at x=1 equal the cell frequency 30/40.
  Eigen::MatrixXd probe(1, 1);
  probe << 1.0;
  CHECK(predict_propensity(fit, probe)[0] == doctest::Approx(0.75).epsilon(1e-6));

  // Score equation at convergence (the spec's invariant).
  Eigen::VectorXd e = predict_propensity(fit, x);
  Eigen::MatrixXd design(x.rows(), 2);
  design.col(0).setOnes();
  design.col(1) = x.col(0);
  Eigen::VectorXd ridge(2);
  ridge << 0.0, 1e-8;
  Eigen::VectorXd beta(2);
  beta << fit.intercept, fit.coefficients[0];
  const Eigen::VectorXd score =
      design.transpose() * (z - e) - ridge.cwiseProduct(beta);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("all-zero covariates give the marginal rate") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(50, 2);
  Eigen::VectorXd z(50);
  for (int i = 0; i < 50; ++i) z[i] = i < 20 ? 1.0 : 0.0;
  const LogisticModel fit = fit_logistic_irls(x, z);
  CHECK(fit.converged);
  CHECK(fit.intercept == doctest::Approx(logit(0.4)).epsilon(1e-8));
  CHECK(std::fabs(fit.coefficients[0]) < 1e-8);
  CHECK(std::fabs(fit.coefficients[1]) < 1e-8);
}

TEST_CASE("fitted mean equals the sample treatment rate") {
  Rng rng(9);
  const int n = 200;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    z[i] = rng.bernoulli(expit(0.8 * x(i, 0) - 0.5 * x(i, 1))) ? 1.0 : 0.0;
  }
  const LogisticModel fit = fit_logistic_irls(x, z);
  CHECK(fit.converged);
  const Eigen::VectorXd e = predict_propensity(fit, x);
  CHECK(e.mean() == doctest::Approx(z.mean()).epsilon(1e-7));

  // Affine rescale of a covariate: predictions unchanged, slope rescaled.
  Eigen::MatrixXd x2 = x;
  x2.col(0) = x.col(0) * 10.0;
  const LogisticModel fit2 = fit_logistic_irls(x2, z);
  const Eigen::VectorXd e2 = predict_propensity(fit2, x2);
  CHECK((e - e2).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(fit2.coefficients[0] == doctest::Approx(fit.coefficients[0] / 10.0).epsilon(1e-4));

  // Monotone in a positive-coefficient covariate.
  Eigen::MatrixXd lo(1, 3), hi(1, 3);
  lo << 0.0, 0.0, 0.0;
  hi << 1.0, 0.0, 0.0;
  CHECK(predict_propensity(fit, hi)[0] > predict_propensity(fit, lo)[0]);
}

TEST_CASE("perfect separation is flagged") {
  Eigen::MatrixXd x(20, 1);
  Eigen::VectorXd z(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    z[i] = i < 10 ? 0.0 : 1.0;
  }
  const LogisticModel fit = fit_logistic_irls(x, z);
  CHECK(fit.separation);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("constant treatment and arity errors") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(10);
  CHECK_THROWS_AS(fit_logistic_irls(x, z), Error);

  Eigen::VectorXd z2 = z;
  z2[0] = 0.0;
  const LogisticModel fit = fit_logistic_irls(x, z2);
  Eigen::MatrixXd wrong(3, 3);
  CHECK_THROWS_AS(predict_propensity(fit, wrong), Error);
}

TEST_CASE("positivity report and truncation") {
  Eigen::VectorXd half = Eigen::VectorXd::Constant(10, 0.5);
  CHECK(positivity_report(half).violations == 0);

  Eigen::VectorXd one_out(3);
  one_out << 0.5, 0.999, 0.2;
  const PositivityReport r = positivity_report(one_out);
  CHECK(r.violations == 1);
  CHECK(r.max_score == doctest::Approx(0.999));
  const Eigen::VectorXd clamped = truncate_scores(one_out);
  CHECK(clamped.maxCoeff() == doctest::Approx(0.99));

  // Grid 0.005..0.995 step 0.005: only the two endpoints fall outside.
  Eigen::VectorXd grid(199);
  for (int k = 1; k <= 199; ++k) grid[k - 1] = static_cast<double>(k) / 200.0;
  CHECK(positivity_report(grid).violations == 2);
}
