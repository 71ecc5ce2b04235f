#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cbench/data.hpp"
#include "cbench/error.hpp"
#include "cbench/rng.hpp"

using namespace cbench;
namespace fs = std::filesystem;

namespace {

std::string temp_csv(const std::string& tag, const std::string& content) {
  const fs::path path = fs::temp_directory_path() / ("cbench_test_" + tag + ".csv");
  std::ofstream out(path);
  out << content;
  out.close();
  return path.string();
}

std::vector<CovariateSchema> small_schema() {
  CovariateSchema age{"age", ColumnKind::continuous, 0, ColumnRole::covariate, {}};
  CovariateSchema sex{"sex", ColumnKind::binary, 0, ColumnRole::covariate, {}};
  return {age, sex};
}

}  // namespace

TEST_CASE("load_csv reads a NRS-shaped file with exact counts") {
  std::string body = "id,arm,z,y_health,age,sex\n";
  int id = 0;
  for (int i = 0; i < 261; ++i) {
    body += std::to_string(id++) + ",NRS,1,0.5," + std::to_string(40.0 + i % 10) + ",1\n";
  }
  for (int i = 0; i < 192; ++i) {
    body += std::to_string(id++) + ",NRS,0,0.6," + std::to_string(45.0 + i % 10) + ",0\n";
  }
  const Dataset d = load_csv(temp_csv("nrs453", body), small_schema());
  CHECK(d.n() == 453);
  CHECK(d.treated_indices().size() == 261);
  CHECK(d.control_indices().size() == 192);
  CHECK(d.outcome_names() == std::vector<std::string>{"y_health"});
}

TEST_CASE("load_csv degenerate and invalid inputs") {
  CHECK_THROWS_WITH_AS(load_csv(temp_csv("empty", "id,arm,z,age,sex\n"), small_schema()),
                       doctest::Contains("no rows"), Error);

  std::string body = "id,arm,z,age,sex\n";
  for (int i = 0; i < 6; ++i) {
    body += std::to_string(i) + ",NRS," + (i == 6 ? "1" : "1") + ",40,1\n";
  }
  body += "6,NRS,2,41,0\n";  // row 7
  try {
    load_csv(temp_csv("z2", body), small_schema());
    FAIL("expected NonBinaryTreatment");
  } catch (const Error& e) {
    CHECK(e.code() == "NonBinaryTreatment");
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }

  // NaN cell names row and column.
  std::string nan_body = "id,arm,z,age,sex\n0,NRS,1,40,1\n1,NRS,0,,0\n";
  try {
    load_csv(temp_csv("nan", nan_body), small_schema());
    FAIL("expected NaNCell");
  } catch (const Error& e) {
    CHECK(e.code() == "NaNCell");
    CHECK(std::string(e.what()).find("age") != std::string::npos);
  }

  CHECK_THROWS_AS(load_csv("/nonexistent/path.csv", small_schema()), Error);
}

TEST_CASE("categorical expansion uses the lexicographically first reference") {
  CovariateSchema emp{"emp", ColumnKind::categorical, 3, ColumnRole::covariate, {}};
  std::string body = "id,arm,z,emp\n";
  const char* levels[] = {"b_mid", "a_low", "c_high"};
  for (int i = 0; i < 9; ++i) {
    body += std::to_string(i) + ",NRS," + std::to_string(i % 2) + "," + levels[i % 3] + "\n";
  }
  const Dataset d = load_csv(temp_csv("cat", body), {emp});
  REQUIRE(d.n_covariates() == 2);
  CHECK(d.columns()[0].name == "emp_b_mid");
  CHECK(d.columns()[1].name == "emp_c_high");
  // Indicator sums are 0 (reference level) or 1.
  for (int i = 0; i < d.n(); ++i) {
    const double s = d.x(i, 0) + d.x(i, 1);
    CHECK((s == 0.0 || s == 1.0));
  }

  // A fourth level violates the declared k=3.
  std::string bad = body + "9,NRS,1,d_extra\n";
  try {
    load_csv(temp_csv("cat4", bad), {emp});
    FAIL("expected UnknownCategoryLevel");
  } catch (const Error& e) {
    CHECK(e.code() == "UnknownCategoryLevel");
  }

  // With explicit level names, unseen values are rejected.
  CovariateSchema strict = emp;
  strict.level_names = {"a_low", "b_mid", "c_high"};
  CHECK_NOTHROW(load_csv(temp_csv("cat", body), {strict}));
  CovariateSchema strict2 = emp;
  strict2.level_names = {"a_low", "b_mid", "x_other"};
  CHECK_THROWS_AS(load_csv(temp_csv("cat", body), {strict2}), Error);
}

TEST_CASE("arm_subset filters, partitions, and is idempotent") {
  std::string body = "id,arm,z,age,sex\n";
  int id = 0;
  for (int i = 0; i < 357; ++i) {
    body += std::to_string(id++) + ",RCT," + std::to_string(i % 2) + ",40,1\n";
  }
  for (int i = 0; i < 453; ++i) {
    body += std::to_string(id++) + ",NRS," + std::to_string(i % 2) + ",50,0\n";
  }
  const Dataset d = load_csv(temp_csv("arms", body), small_schema());
  const Dataset rct = arm_subset(d, Arm::RCT);
  const Dataset nrs = arm_subset(d, Arm::NRS);
  CHECK(rct.n() == 357);
  CHECK(nrs.n() == 453);
  CHECK(rct.n() + nrs.n() == d.n());

  const Dataset again = arm_subset(rct, Arm::RCT);
  CHECK(again.n() == rct.n());
  for (int i = 0; i < again.n(); ++i) CHECK(again.id(i) == rct.id(i));

  CHECK_THROWS_AS(arm_subset(nrs, Arm::RCT), Error);
}

TEST_CASE("summarize computes group moments") {
  std::string body = "id,arm,z,age,sex\n";
  // Treated ages {1,2,3}, control constant 5.
  body += "0,NRS,1,1,0\n1,NRS,1,2,0\n2,NRS,1,3,1\n";
  body += "3,NRS,0,5,1\n4,NRS,0,5,0\n5,NRS,0,5,1\n";
  const Dataset d = load_csv(temp_csv("summ", body), small_schema());
  const auto rows = summarize(d);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].column == "age");
  CHECK(rows[0].mean_t == doctest::Approx(2.0));
  CHECK(rows[0].sd_t == doctest::Approx(1.0));
  CHECK(rows[0].n_t == 3);
  CHECK(rows[0].mean_c == doctest::Approx(5.0));
  CHECK(rows[0].sd_c == doctest::Approx(0.0));

  // Too few in one group.
  std::string tiny = "id,arm,z,age,sex\n0,NRS,1,1,0\n1,NRS,0,2,0\n2,NRS,0,3,1\n";
  CHECK_THROWS_AS(summarize(load_csv(temp_csv("tiny", tiny), small_schema())), Error);
}

TEST_CASE("csv round trip preserves 12 significant digits") {
  Rng rng(99);
  const int n = 40;
  std::vector<CovariateSchema> schema = small_schema();
  std::vector<DataColumn> columns{{"age", "age", ColumnRole::covariate},
                                  {"sex", "sex", ColumnRole::covariate}};
  Eigen::MatrixXd x(n, 2);
  Eigen::MatrixXd y(n, 1);
  std::vector<std::int64_t> ids;
  std::vector<Arm> arms;
  std::vector<int> z;
  for (int i = 0; i < n; ++i) {
    ids.push_back(i);
    arms.push_back(i % 2 == 0 ? Arm::RCT : Arm::NRS);
    z.push_back(i % 3 == 0 ? 1 : 0);
    x(i, 0) = rng.normal() * 1e3;
    x(i, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    y(i, 0) = rng.normal() * 1e-4;
  }
  const Dataset d(schema, columns, {"y_out"}, ids, arms, z, x, y);

  const fs::path path = fs::temp_directory_path() / "cbench_roundtrip.csv";
  write_csv(d, path.string());
  const Dataset back = load_csv(path.string(), schema);
  REQUIRE(back.n() == d.n());
  for (int i = 0; i < n; ++i) {
    CHECK(back.id(i) == d.id(i));
    CHECK(back.arm(i) == d.arm(i));
    CHECK(back.z(i) == d.z(i));
    for (int j = 0; j < 2; ++j) {
      CHECK(back.x(i, j) == doctest::Approx(d.x(i, j)).epsilon(1e-11));
    }
    CHECK(back.outcomes()(i, 0) == doctest::Approx(d.outcomes()(i, 0)).epsilon(1e-11));
  }
}

TEST_CASE("dataset invariants") {
  std::vector<CovariateSchema> schema = small_schema();
  std::vector<DataColumn> columns{{"age", "age", ColumnRole::covariate},
                                  {"sex", "sex", ColumnRole::covariate}};
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(2, 0);
  CHECK_THROWS_AS(Dataset(schema, columns, {}, {5, 5}, {Arm::NRS, Arm::NRS}, {0, 1}, x, y),
                  Error);  // duplicate ids
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Dataset(schema, columns, {}, {0, 1}, {Arm::NRS, Arm::NRS}, {0, 1}, bad, y),
                  Error);
}
