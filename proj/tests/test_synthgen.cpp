#include <doctest.h>

#include <cmath>
#include <map>

#include "cbench/balance.hpp"
#include "cbench/error.hpp"
#include "cbench/synthgen.hpp"

using namespace cbench;

namespace {

DgpConfig simple_config() {
  DgpConfig cfg;
  cfg.n_rct = 200;
  cfg.n_nrs = 300;
  CovariateSpec x1{"x1", ColumnKind::continuous, 0.0, 1.0, 0.5, {}, {}, ColumnRole::covariate, 0.0};
  CovariateSpec x2{"x2", ColumnKind::binary, 0.0, 1.0, 0.4, {}, {}, ColumnRole::covariate, 0.0};
  cfg.covariates = {x1, x2};
  cfg.selection_coefs = Eigen::VectorXd::Zero(2);
  OutcomeSpec out;
  out.name = "y_out";
  out.intercept = 1.0;
  out.baseline = Eigen::VectorXd::Zero(2);
  out.baseline[0] = 0.8;
  out.treatment_effect = 0.6;
  out.interaction = Eigen::VectorXd::Zero(2);
  out.noise_sd = 0.5;
  out.u_loading = 1.0;
  cfg.outcomes = {out};
  cfg.seed = 12;
  return cfg;
}

}  // namespace

TEST_CASE("emitted outcomes satisfy the consistency identity exactly") {
  const GenerateResult r = generate(simple_config());
  REQUIRE(r.potential.size() == static_cast<std::size_t>(r.rct.n() + r.nrs.n()));
  for (const auto& su : r.potential) {
    const Dataset& d = su.arm == Arm::RCT ? r.rct : r.nrs;
    const int row = d.index_of_id(su.id);
    const double emitted = d.outcomes()(row, 0);
    const double expected = su.z == 1 ? su.y1.at("y_out") : su.y0.at("y_out");
    CHECK(emitted == expected);  // bitwise: y = z*y1 + (1-z)*y0
  }
}

TEST_CASE("zero selection gives balanced arms") {
  DgpConfig cfg = simple_config();
  cfg.n_nrs = 10000;
  const GenerateResult r = generate(cfg);
  const auto table = balance_table(r.nrs, std::nullopt, DenominatorPolicy::pooled_sd);
  for (const auto& row : table) CHECK(std::fabs(row.std_diff) < 0.05);
}

TEST_CASE("homogeneous effects make ate and att analytic") {
  const GenerateResult r = generate(simple_config());
  CHECK(r.truth.by_outcome.at("y_out").ate == doctest::Approx(0.6));
  CHECK(r.truth.by_outcome.at("y_out").att == doctest::Approx(0.6));
}

TEST_CASE("interactions shift the att away from the ate") {
  DgpConfig cfg = simple_config();
  cfg.selection_coefs[0] = 1.0;  // treated lean toward high x1
  cfg.outcomes[0].interaction[0] = 0.5;
  const GenerateResult r = generate(cfg);
  const OutcomeTruth t = r.truth.by_outcome.at("y_out");
  CHECK(t.ate == doctest::Approx(cfg.outcomes[0].treatment_effect));
  CHECK(t.att > t.ate + 0.05);  // E[x1 | treated] > 0 by construction
}

TEST_CASE("generation is deterministic in the seed") {
  const GenerateResult a = generate(simple_config());
  const GenerateResult b = generate(simple_config());
  CHECK((a.nrs.covariates() - b.nrs.covariates()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.nrs.outcomes() - b.nrs.outcomes()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < a.nrs.n(); ++i) CHECK(a.nrs.z(i) == b.nrs.z(i));

  DgpConfig other = simple_config();
  other.seed = 13;
  const GenerateResult c = generate(other);
  CHECK((a.nrs.covariates() - c.nrs.covariates()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("config validation") {
  DgpConfig cfg = simple_config();
  cfg.n_rct = 5;
  CHECK_THROWS_AS(generate(cfg), Error);

  cfg = simple_config();
  cfg.selection_coefs = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(generate(cfg), Error);

  cfg = simple_config();
  cfg.covariates[0].sd = 0.0;
  CHECK_THROWS_AS(generate(cfg), Error);
}

TEST_CASE("calibration hits a single-covariate target") {
  DgpConfig cfg = simple_config();
  CalibrationOptions options;
  options.tol = 0.02;
  options.n_calibration = 40000;
  const Eigen::VectorXd coefs = calibrate_to_targets(cfg, {{"x1", -0.5}}, options);
  CHECK(coefs[1] == 0.0);

  DgpConfig check = cfg;
  check.selection_coefs = coefs;
  check.n_nrs = 40000;
  const GenerateResult r = generate(check);
  const auto table = balance_table(r.nrs, std::nullopt, DenominatorPolicy::pooled_sd);
  CHECK(table[0].std_diff > -0.55);
  CHECK(table[0].std_diff < -0.45);
}

TEST_CASE("calibration with zero targets returns near-zero coefficients") {
  DgpConfig cfg = simple_config();
  CalibrationOptions options;
  options.tol = 0.02;
  options.n_calibration = 40000;
  const Eigen::VectorXd coefs =
      calibrate_to_targets(cfg, {{"x1", 0.0}, {"x2", 0.0}}, options);
  CHECK(std::fabs(coefs[0]) < 0.06);
  CHECK(std::fabs(coefs[1]) < 0.06);
}

TEST_CASE("impossible targets are unachievable") {
  DgpConfig cfg = simple_config();
  CalibrationOptions options;
  options.n_calibration = 20000;
  options.max_sweeps = 5;
  CHECK_THROWS_WITH_AS(calibrate_to_targets(cfg, {{"x1", 5.0}}, options),
                       doctest::Contains("Unachievable"), Error);
}

TEST_CASE("reflux preset structure") {
  const DgpConfig cfg = reflux_like_preset();
  CHECK(cfg.n_rct == 357);
  CHECK(cfg.n_nrs == 453);
  const auto names = expanded_column_names(cfg.covariates);
  CHECK(names.size() == 14);
  CHECK(reflux_like_targets().size() == 14);
  CHECK(reflux_like_targets().at("heartburn") == doctest::Approx(-1.08));
  CHECK(reflux_like_targets().at("nausea") == doctest::Approx(-0.77));
  CHECK(reflux_like_targets().at("age") == doctest::Approx(-0.32));

  const GenerateResult r = generate(cfg);
  CHECK(r.rct.n() == 357);
  CHECK(r.nrs.n() == 453);
  CHECK(r.nrs.outcome_names() == std::vector<std::string>{"y_health", "y_qol"});
  // Unique ids across the two arms.
  for (int i = 0; i < r.nrs.n(); ++i) CHECK(r.nrs.id(i) >= 357);
}

TEST_CASE("preset balance approaches the published targets at moderate n") {
  RefluxOptions options;
  options.seed = 5;
  DgpConfig cfg = reflux_like_preset(options);
  cfg.n_nrs = 8000;
  const GenerateResult r = generate(cfg);
  const auto table = balance_table(r.nrs, std::nullopt, DenominatorPolicy::pooled_sd);
  const auto& targets = reflux_like_targets();
  for (const auto& row : table) {
    CHECK(std::fabs(row.std_diff - targets.at(row.covariate)) < 0.12);
  }

  // Group means land near the published values (the summarize example).
  const auto summary = summarize(r.nrs);
  for (const auto& s : summary) {
    if (s.column == "age") {
      CHECK(s.mean_t == doctest::Approx(45.21).epsilon(0.015));
      CHECK(s.mean_c == doctest::Approx(49.04).epsilon(0.015));
    }
  }
}

TEST_CASE("unobserved confounding biases the naive contrast") {
  DgpConfig cfg = simple_config();
  cfg.u_strength = 1.5;
  cfg.n_nrs = 20000;
  const GenerateResult r = generate(cfg);
  // tau-hat from the raw difference in means is pulled away from 0.6 because
  // u raises both selection and outcomes.
  const Eigen::VectorXd y = r.nrs.outcome("y_out");
  double mt = 0.0, mc = 0.0;
  int nt = 0, nc = 0;
  for (int i = 0; i < r.nrs.n(); ++i) {
    if (r.nrs.z(i) == 1) {
      mt += y[i];
      ++nt;
    } else {
      mc += y[i];
      ++nc;
    }
  }
  const double naive = mt / nt - mc / nc;
  CHECK(naive > 0.6 + 0.2);
}
