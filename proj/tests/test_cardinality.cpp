#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cbench/error.hpp"
#include "cbench/matching.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"

using namespace cbench;

namespace {

Dataset one_covariate_dataset(const std::vector<double>& x_t, const std::vector<double>& x_c) {
  const int n = static_cast<int>(x_t.size() + x_c.size());
  std::vector<CovariateSchema> schema{{"x", ColumnKind::continuous, 0, ColumnRole::covariate, {}}};
  std::vector<DataColumn> columns{{"x", "x", ColumnRole::covariate}};
  Eigen::MatrixXd x(n, 1);
  Eigen::MatrixXd y(n, 0);
  std::vector<std::int64_t> ids;
  std::vector<Arm> arms(static_cast<std::size_t>(n), Arm::NRS);
  std::vector<int> z;
  int i = 0;
  for (double v : x_t) {
    x(i, 0) = v;
    ids.push_back(i);
    z.push_back(1);
    ++i;
  }
  for (double v : x_c) {
    x(i, 0) = v;
    ids.push_back(i);
    z.push_back(0);
    ++i;
  }
  return Dataset(schema, columns, {}, ids, arms, z, x, y);
}

// Exhaustive search for the largest balanced subset pairing (single covariate).
int exhaustive_count(const std::vector<double>& x_t, const std::vector<double>& x_c,
                     double threshold) {
  const double sd = std::sqrt(0.5 * (sample_variance(x_t) + sample_variance(x_c)));
  const int nt = static_cast<int>(x_t.size());
  const int nc = static_cast<int>(x_c.size());
  for (int m = std::min(nt, nc); m >= 1; --m) {
    for (int st = 0; st < (1 << nt); ++st) {
      if (__builtin_popcount(static_cast<unsigned>(st)) != m) continue;
      double sum_t = 0.0;
      for (int i = 0; i < nt; ++i) {
        if (st & (1 << i)) sum_t += x_t[static_cast<std::size_t>(i)];
      }
      for (int sc = 0; sc < (1 << nc); ++sc) {
        if (__builtin_popcount(static_cast<unsigned>(sc)) != m) continue;
        double sum_c = 0.0;
        for (int i = 0; i < nc; ++i) {
          if (sc & (1 << i)) sum_c += x_c[static_cast<std::size_t>(i)];
        }
        if (std::fabs(sum_t - sum_c) <= threshold * sd * m + 1e-9) return m;
      }
    }
  }
  return 0;
}

}  // namespace

TEST_CASE("loose constraints match everyone") {
  const std::vector<double> x_t{0.0, 1.0, 2.0, 9.0};
  const std::vector<double> x_c{0.5, 1.5, 2.5};
  const Dataset d = one_covariate_dataset(x_t, x_c);
  const MatchResult match = cardinality_match(d, {{"x", 10.0}});
  CHECK(match.pairs.size() == 3);  // min(n_t, n_c)
  CHECK(match.flags.empty());
}

TEST_CASE("hand-built instance where only 3 pairs can balance") {
  const std::vector<double> x_t{0.0, 0.0, 0.0, 10.0};
  const std::vector<double> x_c{0.0, 0.0, 0.0, 0.0};
  const Dataset d = one_covariate_dataset(x_t, x_c);
  const MatchResult match = cardinality_match(d, {{"x", 0.1}});
  CHECK(match.pairs.size() == 3);
  CHECK(exhaustive_count(x_t, x_c, 0.1) == 3);
  // The outlier treated unit is the one trimmed.
  for (const auto& pair : match.pairs) CHECK(pair.treated_id != 3);
}

TEST_CASE("disjoint supports with a tight threshold are infeasible") {
  const std::vector<double> x_t{10.0, 11.0, 12.0};
  const std::vector<double> x_c{0.0, 1.0, 2.0};
  const Dataset d = one_covariate_dataset(x_t, x_c);
  CHECK_THROWS_AS(cardinality_match(d, {{"x", 0.01}}), Error);
}

TEST_CASE("unknown constraint covariate is rejected") {
  const Dataset d = one_covariate_dataset({0.0, 1.0}, {0.0, 1.0});
  CHECK_THROWS_AS(cardinality_match(d, {{"nope", 0.1}}), Error);
}

TEST_CASE("matched count equals exhaustive search on random small instances") {
  Rng rng(2024);
  int nontrivial = 0;
  for (int rep = 0; rep < 25; ++rep) {
    const int nt = 3 + static_cast<int>(rng.uniform_int(6));  // 3..8
    const int nc = 3 + static_cast<int>(rng.uniform_int(6));
    std::vector<double> x_t(static_cast<std::size_t>(nt)), x_c(static_cast<std::size_t>(nc));
    for (auto& v : x_t) v = rng.normal() + 0.8;
    for (auto& v : x_c) v = rng.normal();
    const double threshold = 0.05 + 0.3 * rng.uniform01();
    const int expected = exhaustive_count(x_t, x_c, threshold);
    const Dataset d = one_covariate_dataset(x_t, x_c);
    if (expected == 0) {
      CHECK_THROWS_AS(cardinality_match(d, {{"x", threshold}}), Error);
      continue;
    }
    const MatchResult match = cardinality_match(d, {{"x", threshold}});
    CHECK(static_cast<int>(match.pairs.size()) == expected);
    if (expected < std::min(nt, nc)) ++nontrivial;

    // The audit the solver is supposed to guarantee: the selected groups meet
    // the constraint exactly as specified.
    double sum_t = 0.0, sum_c = 0.0;
    for (const auto& pair : match.pairs) {
      sum_t += d.covariates()(d.index_of_id(pair.treated_id), 0);
      sum_c += d.covariates()(d.index_of_id(pair.control_id), 0);
    }
    const double sd = std::sqrt(0.5 * (sample_variance(x_t) + sample_variance(x_c)));
    CHECK(std::fabs(sum_t - sum_c) <=
          threshold * sd * static_cast<double>(match.pairs.size()) + 1e-6);
  }
  CHECK(nontrivial >= 3);  // the sample must include genuinely trimmed cases
}

TEST_CASE("count is invariant to unit permutation") {
  Rng rng(5150);
  std::vector<double> x_t, x_c;
  for (int i = 0; i < 7; ++i) x_t.push_back(rng.normal() + 1.0);
  for (int i = 0; i < 7; ++i) x_c.push_back(rng.normal());
  const MatchResult a = cardinality_match(one_covariate_dataset(x_t, x_c), {{"x", 0.15}});
  std::reverse(x_t.begin(), x_t.end());
  std::reverse(x_c.begin(), x_c.end());
  const MatchResult b = cardinality_match(one_covariate_dataset(x_t, x_c), {{"x", 0.15}});
  CHECK(a.pairs.size() == b.pairs.size());
}
