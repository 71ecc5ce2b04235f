#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "cbench/matching.hpp"
#include "cbench/rng.hpp"

namespace {

Eigen::MatrixXd random_distances(int nt, int nc, std::uint64_t seed) {
  cbench::Rng rng(seed);
  Eigen::MatrixXd d(nt, nc);
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nc; ++j) d(i, j) = rng.uniform01();
  }
  return d;
}

void BM_GreedyMatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd d = random_distances(n, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::greedy_nn_match(d));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_GreedyMatch)->Range(32, 512)->Complexity();

void BM_OptimalMatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd d = random_distances(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::optimal_pair_match(d));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_OptimalMatch)->Range(32, 512)->Complexity();

void BM_CardinalityMatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  cbench::Rng rng(3);
  std::vector<double> x_t, x_c;
  for (int i = 0; i < n; ++i) x_t.push_back(rng.normal() + 0.5);
  for (int i = 0; i < n; ++i) x_c.push_back(rng.normal());

  std::vector<cbench::CovariateSchema> schema{
      {"x", cbench::ColumnKind::continuous, 0, cbench::ColumnRole::covariate, {}}};
  std::vector<cbench::DataColumn> columns{{"x", "x", cbench::ColumnRole::covariate}};
  const int total = 2 * n;
  Eigen::MatrixXd x(total, 1);
  Eigen::MatrixXd y(total, 0);
  std::vector<std::int64_t> ids;
  std::vector<cbench::Arm> arms(static_cast<std::size_t>(total), cbench::Arm::NRS);
  std::vector<int> z;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = x_t[static_cast<std::size_t>(i)];
    ids.push_back(i);
    z.push_back(1);
  }
  for (int i = 0; i < n; ++i) {
    x(n + i, 0) = x_c[static_cast<std::size_t>(i)];
    ids.push_back(n + i);
    z.push_back(0);
  }
  const cbench::Dataset d(schema, columns, {}, ids, arms, z, x, y);

  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::cardinality_match(d, {{"x", 0.1}}));
  }
}
BENCHMARK(BM_CardinalityMatch)->Range(16, 128);

}  // namespace
