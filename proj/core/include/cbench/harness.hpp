#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cbench/data.hpp"
#include "cbench/effect.hpp"
#include "cbench/estimators.hpp"

namespace cbench {

struct RctBenchmark {
  EffectEstimate itt;
  double sd_control = 0.0;  // SD of the control-group outcomes
};

// Difference in outcome means by assigned arm (crossover is ignored by
// construction), Welch se with a Satterthwaite-t interval, plus the control
// group sd that the standardized-bias denominator uses.
RctBenchmark rct_itt_estimate(const Dataset& rct, const std::string& outcome);

// (tau_rct - tau_obs) / sd_rct_control.
double standardized_bias(double tau_rct, double tau_obs, double sd_rct_control);

// CI length plus squared bias, exactly as defined for the benchmark even
// though the units are unconventional.
double mse_metric(double bias_std, std::pair<double, double> ci);

enum class Verdict { star, x, failed };

std::string verdict_label(Verdict v);  // "ok" / "BIASED" / "FAILED"

struct BootstrapConfig {
  int B = 1000;
  std::uint64_t seed = 0;
};

struct BenchmarkConfig {
  std::vector<MethodConfig> methods;
  BootstrapConfig bootstrap;
  std::string outcome;
  int jobs = 0;  // 0 = hardware concurrency
};

struct BenchmarkRow {
  std::string method_id;
  std::string group;
  Estimand estimand = Estimand::ATE;
  EffectEstimate obs;                          // on the original NRS data
  double std_bias = 0.0;                       // point value
  std::pair<double, double> std_bias_ci{0, 0};  // percentile bootstrap
  double mse = 0.0;
  Verdict verdict = Verdict::failed;
  int bootstrap_failures = 0;
  std::string settings_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> flags;
};

struct BenchmarkReport {
  std::uint64_t seed = 0;
  int bootstrap_reps = 0;
  std::string outcome;
  RctBenchmark rct;
  std::vector<BenchmarkRow> rows;  // grouped by approach panel
};

// Percentile bootstrap for the standardized bias of one method: units are
// resampled within each arm independently, the full method re-runs per
// replicate with a replicate-derived seed, and the denominator sd is
// recomputed per replicate. Deterministic given the seed.
std::pair<double, double> bias_ci(const MethodConfig& method, const Dataset& rct,
                                  const Dataset& nrs, const std::string& outcome, int B,
                                  std::uint64_t seed, int jobs = 1);

// The full protocol: the RCT benchmark, every configured method on the NRS
// arm, and per-method standardized bias, bias CI, MSE, and verdict. Method
// failures are recorded and the run continues. Bit-identical reruns for a
// fixed seed at any jobs setting.
BenchmarkReport run_benchmark(const BenchmarkConfig& config, const Dataset& rct,
                              const Dataset& nrs);

}  // namespace cbench
