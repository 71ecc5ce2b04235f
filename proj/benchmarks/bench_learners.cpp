#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "cbench/learners.hpp"
#include "cbench/rng.hpp"
#include "cbench/super_learner.hpp"

namespace {

struct Synth {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Synth make_data(int n, int p, std::uint64_t seed) {
  cbench::Rng rng(seed);
  Synth s;
  s.x.resize(n, p);
  s.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.x(i, j) = rng.normal();
    s.y[i] = std::sin(s.x(i, 0)) + 0.5 * s.x(i, 1) + 0.2 * rng.normal();
  }
  return s;
}

void BM_ForestFit(benchmark::State& state) {
  const Synth s = make_data(static_cast<int>(state.range(0)), 10, 1);
  cbench::ForestConfig config;
  config.n_trees = 50;
  config.seed = 2;
  for (auto _ : state) {
    cbench::RandomForest forest;
    forest.fit(s.x, s.y, config);
    benchmark::DoNotOptimize(forest);
  }
}
BENCHMARK(BM_ForestFit)->Range(256, 2048);

void BM_BoostFit(benchmark::State& state) {
  const Synth s = make_data(static_cast<int>(state.range(0)), 10, 3);
  cbench::BoostConfig config;
  config.n_rounds = 100;
  for (auto _ : state) {
    cbench::GradientBoosting boost;
    boost.fit(s.x, s.y, config);
    benchmark::DoNotOptimize(boost);
  }
}
BENCHMARK(BM_BoostFit)->Range(256, 2048);

void BM_LassoCv(benchmark::State& state) {
  const Synth s = make_data(static_cast<int>(state.range(0)), 20, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::lasso_cv_lambda(s.x, s.y, 20, 10, 5));
  }
}
BENCHMARK(BM_LassoCv)->Range(256, 1024);

void BM_SuperLearnerFit(benchmark::State& state) {
  const Synth s = make_data(static_cast<int>(state.range(0)), 8, 6);
  std::vector<cbench::LearnerSpec> specs(3);
  specs[0].kind = cbench::LearnerKind::forest;
  specs[0].hyperparameters = {{"n_trees", 25}, {"min_leaf", 10}};
  specs[1].kind = cbench::LearnerKind::lasso;
  specs[1].hyperparameters = {{"lambda_grid", 5}, {"lambda_folds", 4}};
  specs[2].kind = cbench::LearnerKind::boosting;
  specs[2].hyperparameters = {{"n_rounds", 50}};
  for (auto _ : state) {
    cbench::SuperLearner sl;
    sl.fit(specs, s.x, s.y, 4, 7);
    benchmark::DoNotOptimize(sl);
  }
}
BENCHMARK(BM_SuperLearnerFit)->Range(256, 1024);

}  // namespace
