#include <benchmark/benchmark.h>

#include "cbench/harness.hpp"
#include "cbench/synthgen.hpp"

namespace {

void BM_RefluxGenerate(benchmark::State& state) {
  cbench::RefluxOptions options;
  options.n_rct = static_cast<int>(state.range(0));
  options.n_nrs = static_cast<int>(state.range(0));
  const cbench::DgpConfig cfg = cbench::reflux_like_preset(options);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::generate(cfg));
  }
}
BENCHMARK(BM_RefluxGenerate)->Range(512, 8192);

void BM_BenchmarkRun(benchmark::State& state) {
  cbench::RefluxOptions options;
  options.seed = 5;
  const cbench::GenerateResult r = cbench::generate(cbench::reflux_like_preset(options));

  cbench::BenchmarkConfig config;
  config.outcome = "y_health";
  config.bootstrap = {100, 11};
  config.jobs = static_cast<int>(state.range(0));
  for (const char* id : {"regadj", "ipw", "aipw", "psmatch", "psmatch+ra"}) {
    cbench::MethodConfig m;
    m.method_id = id;
    m.estimand = cbench::default_estimand(id);
    config.methods.push_back(m);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(cbench::run_benchmark(config, r.rct, r.nrs));
  }
}
BENCHMARK(BM_BenchmarkRun)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
