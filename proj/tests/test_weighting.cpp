#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cbench/balance.hpp"
#include "cbench/error.hpp"
#include "cbench/linear_model.hpp"
#include "cbench/propensity.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"
#include "cbench/synthgen.hpp"
#include "cbench/weighting.hpp"

using namespace cbench;

namespace {

Dataset weighting_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
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
  Eigen::MatrixXd ymat(n, 1);
  ymat.col(0) = y;
  return Dataset(schema, columns, {"y_out"},
                 ids, std::vector<Arm>(static_cast<std::size_t>(n), Arm::NRS), z, x, ymat);
}

}  // namespace

TEST_CASE("weight construction") {
  Eigen::VectorXd z(4), e(4);
  z << 1, 1, 0, 0;
  e << 0.5, 0.5, 0.5, 0.5;
  WeightOptions raw;
  raw.normalize = false;
  const WeightVector ate = make_weights(z, e, Estimand::ATE, raw);
  for (int i = 0; i < 4; ++i) CHECK(ate.weights[i] == doctest::Approx(2.0));

  Eigen::VectorXd e2(4);
  e2 << 0.5, 0.5, 0.8, 0.5;
  const WeightVector att = make_weights(z, e2, Estimand::ATT, raw);
  CHECK(att.weights[0] == doctest::Approx(1.0));
  CHECK(att.weights[1] == doctest::Approx(1.0));
  CHECK(att.weights[2] == doctest::Approx(4.0));  // 0.8 / 0.2
  CHECK(att.weights[3] == doctest::Approx(1.0));

  // Hajek normalization: each arm sums to 1.
  const WeightVector norm = make_weights(z, e2, Estimand::ATT);
  double st = 0.0, sc = 0.0;
  for (int i = 0; i < 4; ++i) (z[i] == 1.0 ? st : sc) += norm.weights[i];
  CHECK(st == doctest::Approx(1.0));
  CHECK(sc == doctest::Approx(1.0));

  // Untruncated extreme scores are an error; truncation clamps instead.
  Eigen::VectorXd e3(4);
  e3 << 0.5, 0.995, 0.5, 0.5;
  WeightOptions no_trunc;
  no_trunc.truncate = false;
  CHECK_THROWS_AS(make_weights(z, e3, Estimand::ATE, no_trunc), Error);
  CHECK_NOTHROW(make_weights(z, e3, Estimand::ATE));
}

TEST_CASE("ipw hand computation for the ATT") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
  Eigen::VectorXd y(3);
  y << 3.0, 1.0, 2.0;
  const std::vector<int> z{1, 0, 0};
  Eigen::VectorXd e(3);
  e << 0.5, 0.5, 0.8;
  const Dataset d = weighting_dataset(x, y, z);
  const WeightVector w = make_weights(d.treatment(), e, Estimand::ATT);
  const EffectEstimate est = ipw_estimate(d, "y_out", w);
  // Weighted control mean (1*1 + 4*2)/5 = 1.8.
  CHECK(est.tau == doctest::Approx(3.0 - 1.8).epsilon(1e-12));
}

TEST_CASE("constant scores reduce ipw to the raw difference in means") {
  Rng rng(3);
  const int n = 50;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  double sum_t = 0.0, sum_c = 0.0;
  int n_t = 0, n_c = 0;
  for (int i = 0; i < n; ++i) {
    z[static_cast<std::size_t>(i)] = i % 2;
    y[i] = rng.normal();
    if (i % 2 == 1) {
      sum_t += y[i];
      ++n_t;
    } else {
      sum_c += y[i];
      ++n_c;
    }
  }
  const Dataset d = weighting_dataset(x, y, z);
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(n, 0.37);
  const EffectEstimate hajek =
      ipw_estimate(d, "y_out", make_weights(d.treatment(), e, Estimand::ATE));
  WeightOptions raw;
  raw.normalize = false;
  const EffectEstimate ht =
      ipw_estimate(d, "y_out", make_weights(d.treatment(), e, Estimand::ATE, raw));
  const double diff = sum_t / n_t - sum_c / n_c;
  CHECK(hajek.tau == doctest::Approx(diff).epsilon(1e-12));
  CHECK(ht.tau == doctest::Approx(diff).epsilon(1e-12));
}

TEST_CASE("ipw recovers a known ATE in a randomized synthetic draw") {
  Rng rng(404);
  const int n = 5000;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    e[i] = expit(0.6 * x(i, 0) - 0.4 * x(i, 1));
    z[static_cast<std::size_t>(i)] = rng.bernoulli(e[i]) ? 1 : 0;
    y[i] = 0.5 * z[static_cast<std::size_t>(i)] + x(i, 0) + 0.7 * x(i, 1) + rng.normal();
  }
  const Dataset d = weighting_dataset(x, y, z);
  const EffectEstimate est =
      ipw_estimate(d, "y_out", make_weights(d.treatment(), e, Estimand::ATE));
  CHECK(std::fabs(est.tau - 0.5) < 3.0 * est.se);
}

TEST_CASE("aipw algebraic reductions") {
  Rng rng(12);
  const int n = 200;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    z[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    y[i] = 1.0 + x(i, 0) + 2.0 * z[static_cast<std::size_t>(i)] + rng.normal();
  }
  const Dataset d = weighting_dataset(x, y, z);
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(n, 0.5);

  SUBCASE("zero-residual outcome models reduce to g-computation") {
    // mu models equal to y by arm: make mu1/mu0 exact per-unit fits.
    Eigen::VectorXd mu1(n), mu0(n);
    for (int i = 0; i < n; ++i) {
      mu1[i] = z[static_cast<std::size_t>(i)] == 1 ? y[i] : 1.0 + x(i, 0) + 2.0;
      mu0[i] = z[static_cast<std::size_t>(i)] == 0 ? y[i] : 1.0 + x(i, 0);
    }
    const EffectEstimate est = aipw_estimate(d, "y_out", e, mu1, mu0);
    const double gcomp = (mu1 - mu0).mean();
    CHECK(est.tau == doctest::Approx(gcomp).epsilon(1e-12));
  }

  SUBCASE("zero outcome models reduce to unnormalized ipw") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    const EffectEstimate est = aipw_estimate(d, "y_out", e, zero, zero);
    double ht = 0.0;
    for (int i = 0; i < n; ++i) {
      const double zi = z[static_cast<std::size_t>(i)];
      ht += zi * y[i] / 0.5 - (1.0 - zi) * y[i] / 0.5;
    }
    CHECK(est.tau == doctest::Approx(ht / n).epsilon(1e-12));
  }

  SUBCASE("invariant to adding a constant to both outcome models") {
    // The shift contributes c * mean(-z/e + (1-z)/(1-e)), which vanishes when
    // the scores are calibrated to the sample; a constant score equal to the
    // treated share makes the cancellation exact.
    const Eigen::VectorXd e_cal = Eigen::VectorXd::Constant(n, d.treatment().mean());
    Eigen::VectorXd mu1 = Eigen::VectorXd::Constant(n, 2.0);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(n, 1.0);
    const EffectEstimate base = aipw_estimate(d, "y_out", e_cal, mu1, mu0);
    const EffectEstimate shifted = aipw_estimate(
        d, "y_out", e_cal, (mu1.array() + 17.0).matrix(), (mu0.array() + 17.0).matrix());
    CHECK(shifted.tau == doctest::Approx(base.tau).epsilon(1e-10));
  }
}

TEST_CASE("weighted regression estimator") {
  Rng rng(88);
  const int n = 120;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    z[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    y[i] = 2.0 * z[static_cast<std::size_t>(i)] + x(i, 0);  // exact linear truth
  }
  const Dataset d = weighting_dataset(x, y, z);

  SUBCASE("exact linear truth gives 2 under any weights") {
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) e[i] = 0.2 + 0.6 * expit(x(i, 0));
    const WeightVector w = make_weights(d.treatment(), e, Estimand::ATE);
    const EffectEstimate est = ipw_regression_estimate(d, "y_out", w);
    CHECK(est.tau == doctest::Approx(2.0).epsilon(1e-8));
  }

  SUBCASE("uniform weights equal the unweighted regression") {
    WeightVector w;
    w.weights = Eigen::VectorXd::Ones(n);
    w.estimand = Estimand::ATE;
    const EffectEstimate weighted = ipw_regression_estimate(d, "y_out", w);

    Eigen::MatrixXd design(n, 2);
    design.col(0) = d.treatment();
    design.col(1) = x.col(0);
    const LinearModel plain = fit_ols(design, y);
    CHECK(weighted.tau == doctest::Approx(plain.coefficients[1]).epsilon(1e-10));
  }

  SUBCASE("weights selecting a quartet reproduce that subgroup contrast") {
    // Nonzero weight only on rows 0..3, with x exactly balanced across the
    // two arms of the quartet so the z coefficient is their mean contrast.
    Eigen::MatrixXd x4 = x;
    Eigen::VectorXd y4 = y;
    std::vector<int> z4 = z;
    const double xvals[] = {0.5, 0.7, 0.5, 0.7};
    for (int i = 0; i < 4; ++i) {
      x4(i, 0) = xvals[i];
      z4[static_cast<std::size_t>(i)] = i < 2 ? 1 : 0;
      y4[i] = i < 2 ? 3.0 + 0.1 * i : 1.0 + 0.1 * (i - 2);
    }
    const Dataset d4 = weighting_dataset(x4, y4, z4);
    WeightVector w;
    w.weights = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < 4; ++i) w.weights[i] = 1.0;
    w.estimand = Estimand::ATT;
    const EffectEstimate est = ipw_regression_estimate(d4, "y_out", w);
    const double expected = (3.0 + 3.1) / 2.0 - (1.0 + 1.1) / 2.0;
    CHECK(est.tau == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("fitted weights shrink every covariate imbalance on calibrated data") {
  // Balance-table oracle: on the calibrated preset, logistic-fit ATE weights
  // must bring each weighted |std_diff| below its unweighted value.
  RefluxOptions options;
  options.seed = 99;
  DgpConfig cfg = reflux_like_preset(options);
  cfg.n_nrs = 20000;
  const GenerateResult r = generate(cfg);

  const LogisticModel model = fit_logistic_irls(r.nrs.covariates(), r.nrs.treatment());
  const Eigen::VectorXd e = truncate_scores(predict_propensity(model, r.nrs.covariates()));
  const WeightVector w = make_weights(r.nrs.treatment(), e, Estimand::ATE);
  std::vector<double> weights(w.weights.data(), w.weights.data() + w.weights.size());

  const auto before = balance_table(r.nrs, std::nullopt, DenominatorPolicy::pooled_sd);
  const auto after = balance_table(r.nrs, weights, DenominatorPolicy::pooled_sd);
  REQUIRE(before.size() == after.size());
  for (std::size_t j = 0; j < before.size(); ++j) {
    CHECK(std::fabs(after[j].std_diff) < std::fabs(before[j].std_diff));
  }
}

TEST_CASE("saturated weights balance discrete covariates exactly") {
  // Two strata with known treatment rates; weights from the exact propensity
  // equalize the weighted covariate means.
  const int n = 40;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<int> z(static_cast<std::size_t>(n));
  Eigen::VectorXd e(n);
  // Stratum x=0: 20 units, 5 treated (e=0.25); x=1: 20 units, 15 treated.
  for (int i = 0; i < n; ++i) {
    const bool high = i >= 20;
    x(i, 0) = high ? 1.0 : 0.0;
    const int pos = i % 20;
    z[static_cast<std::size_t>(i)] = high ? (pos < 15 ? 1 : 0) : (pos < 5 ? 1 : 0);
    e[i] = high ? 0.75 : 0.25;
    y[i] = 0.0;
  }
  const Dataset d = weighting_dataset(x, y, z);
  const WeightVector w = make_weights(d.treatment(), e, Estimand::ATE);
  double mt = 0.0, wt = 0.0, mc = 0.0, wc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (z[static_cast<std::size_t>(i)] == 1) {
      mt += w.weights[i] * x(i, 0);
      wt += w.weights[i];
    } else {
      mc += w.weights[i] * x(i, 0);
      wc += w.weights[i];
    }
  }
  CHECK(mt / wt == doctest::Approx(mc / wc).epsilon(1e-10));
}
