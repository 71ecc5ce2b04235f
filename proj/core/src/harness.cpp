#include "cbench/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "cbench/error.hpp"
#include "cbench/parallel.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"
#include "cbench/subprocess.hpp"

namespace cbench {

RctBenchmark rct_itt_estimate(const Dataset& rct, const std::string& outcome) {
  const Eigen::VectorXd y = rct.outcome(outcome);
  std::vector<double> yt, yc;
  for (int i = 0; i < rct.n(); ++i) {
    (rct.z(i) == 1 ? yt : yc).push_back(y[i]);
  }
  require(yt.size() >= 2 && yc.size() >= 2, "DegenerateArm",
          "rct_itt_estimate needs n >= 2 per assignment group");

  const double mt = mean(yt);
  const double mc = mean(yc);
  const double vt = sample_variance(yt);
  const double vc = sample_variance(yc);
  const double a = vt / static_cast<double>(yt.size());
  const double b = vc / static_cast<double>(yc.size());

  RctBenchmark out;
  out.itt.method_id = "rct_itt";
  out.itt.estimand = Estimand::ATE;
  out.itt.tau = mt - mc;
  out.itt.se = std::sqrt(a + b);
  if (a + b > 0.0) {
    const double df = (a + b) * (a + b) /
                      (a * a / (yt.size() - 1.0) + b * b / (yc.size() - 1.0));
    const double tq = student_t_quantile(0.975, df);
    out.itt.ci_lo = out.itt.tau - tq * out.itt.se;
    out.itt.ci_hi = out.itt.tau + tq * out.itt.se;
  } else {
    out.itt.ci_lo = out.itt.ci_hi = out.itt.tau;
  }
  out.itt.n_used = rct.n();
  out.sd_control = sample_sd(yc);
  return out;
}

double standardized_bias(double tau_rct, double tau_obs, double sd_rct_control) {
  require(sd_rct_control > 0.0, "ZeroDenominator",
          "standardized_bias needs sd_rct_control > 0");
  return (tau_rct - tau_obs) / sd_rct_control;
}

double mse_metric(double bias_std, std::pair<double, double> ci) {
  require(ci.second >= ci.first, "DomainError", "mse_metric needs hi >= lo");
  return (ci.second - ci.first) + bias_std * bias_std;
}

std::string verdict_label(Verdict v) {
  switch (v) {
    case Verdict::star: return "ok";
    case Verdict::x: return "BIASED";
    case Verdict::failed: return "FAILED";
  }
  return "FAILED";
}

namespace {

constexpr double kFailureFlagRate = 0.05;

std::vector<int> resample_rows(int n, Rng& rng) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  return rows;
}

EffectEstimate run_plugin(const MethodConfig& config, const Dataset& nrs,
                          std::uint64_t seed) {
  require(config.settings.contains("command"), "DomainError",
          "plugin methods need settings.command (argv list)");
  std::vector<std::string> argv;
  for (const auto& a : config.settings.at("command")) argv.push_back(a.get<std::string>());
  require(!argv.empty(), "DomainError", "plugin command must not be empty");

  // The child reads the NRS CSV (path appended as the last argument) and
  // prints one "tau,se" line.
  namespace fs = std::filesystem;
  char name[128];
  std::snprintf(name, sizeof(name), "cbench_plugin_%d_%016llx.csv", getpid(),
                static_cast<unsigned long long>(seed));
  const fs::path csv = fs::temp_directory_path() / name;
  write_csv(nrs, csv.string());
  argv.push_back(csv.string());

  CommandResult result;
  try {
    result = run_command(argv);
  } catch (...) {
    std::error_code ec;
    fs::remove(csv, ec);
    throw;
  }
  std::error_code ec;
  fs::remove(csv, ec);

  if (result.exit_code != 0) {
    fail("NonzeroExit", "plugin '" + config.method_id + "' exited with code " +
                            std::to_string(result.exit_code));
  }
  const std::string& text = result.stdout_text;
  const auto line_end = text.find('\n');
  const std::string line = line_end == std::string::npos ? text : text.substr(0, line_end);
  const auto comma = line.find(',');
  require(comma != std::string::npos, "ParseError",
          "plugin output must be 'tau,se', got '" + line + "'");
  EffectEstimate e;
  try {
    std::size_t pos = 0;
    e.tau = std::stod(line.substr(0, comma), &pos);
    e.se = std::stod(line.substr(comma + 1), &pos);
  } catch (const std::exception&) {
    fail("ParseError", "plugin output must be 'tau,se', got '" + line + "'");
  }
  require(std::isfinite(e.tau) && std::isfinite(e.se) && e.se >= 0.0, "ParseError",
          "plugin emitted non-finite tau/se");
  e.method_id = config.method_id;
  e.estimand = config.estimand;
  set_normal_ci(e);
  e.n_used = nrs.n();
  return e;
}

EffectEstimate dispatch_method(const MethodConfig& config, const Dataset& nrs,
                               const std::string& outcome, std::uint64_t seed) {
  if (config.method_id.rfind("plugin:", 0) == 0) return run_plugin(config, nrs, seed);
  return run_method(config, nrs, outcome, seed);
}

struct ReplicateOutcome {
  bool ok = false;
  double tau = 0.0;
  double bias = 0.0;
};

}  // namespace

std::pair<double, double> bias_ci(const MethodConfig& method, const Dataset& rct,
                                  const Dataset& nrs, const std::string& outcome, int B,
                                  std::uint64_t seed, int jobs) {
  require(B >= 100, "DomainError", "bias_ci needs B >= 100");
  BenchmarkConfig config;
  config.methods = {method};
  config.bootstrap = {B, seed};
  config.outcome = outcome;
  config.jobs = jobs;
  const BenchmarkReport report = run_benchmark(config, rct, nrs);
  require(report.rows.front().verdict != Verdict::failed, "MethodFailure",
          "method failed on the original data");
  return report.rows.front().std_bias_ci;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const Dataset& rct,
                              const Dataset& nrs) {
  require(!config.methods.empty(), "DomainError", "benchmark needs >= 1 method");
  require(config.bootstrap.B >= 100, "DomainError", "bootstrap B must be >= 100");
  {
    std::vector<std::string> ids;
    for (const auto& m : config.methods) ids.push_back(m.method_id);
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "DuplicateMethod",
            "method ids must be unique");
  }

  const int B = config.bootstrap.B;
  const std::size_t n_methods = config.methods.size();
  const Rng master(config.bootstrap.seed);

  // Shared per-replicate resamples (replicate 0 = original data). Index pairs
  // are drawn up front so worker scheduling cannot affect them.
  std::vector<std::vector<int>> rct_rows(static_cast<std::size_t>(B) + 1);
  std::vector<std::vector<int>> nrs_rows(static_cast<std::size_t>(B) + 1);
  for (int r = 1; r <= B; ++r) {
    Rng rng = master.derive(static_cast<std::uint64_t>(r));
    rct_rows[static_cast<std::size_t>(r)] = resample_rows(rct.n(), rng);
    nrs_rows[static_cast<std::size_t>(r)] = resample_rows(nrs.n(), rng);
  }

  // RCT side once per replicate.
  struct RctRep {
    bool ok = false;
    double tau = 0.0, sd = 0.0;
  };
  std::vector<RctRep> rct_reps(static_cast<std::size_t>(B) + 1);
  const RctBenchmark rct_point = rct_itt_estimate(rct, config.outcome);
  rct_reps[0] = {true, rct_point.itt.tau, rct_point.sd_control};
  parallel_for(static_cast<std::size_t>(B), config.jobs, [&](std::size_t i) {
    const int r = static_cast<int>(i) + 1;
    try {
      const Dataset rep = rct.subset(rct_rows[static_cast<std::size_t>(r)], true);
      const RctBenchmark est = rct_itt_estimate(rep, config.outcome);
      rct_reps[static_cast<std::size_t>(r)] = {est.sd_control > 0.0, est.itt.tau, est.sd_control};
    } catch (const Error&) {
      rct_reps[static_cast<std::size_t>(r)].ok = false;
    }
  });

  // Method x replicate grid.
  std::vector<std::vector<ReplicateOutcome>> grid(
      n_methods, std::vector<ReplicateOutcome>(static_cast<std::size_t>(B) + 1));
  parallel_for(n_methods * (static_cast<std::size_t>(B) + 1), config.jobs, [&](std::size_t task) {
    const std::size_t mi = task / (static_cast<std::size_t>(B) + 1);
    const int r = static_cast<int>(task % (static_cast<std::size_t>(B) + 1));
    const MethodConfig& method = config.methods[mi];
    const std::uint64_t method_seed =
        method.seed != 0 ? method.seed : Rng::mix(config.bootstrap.seed, 0xABCD + mi);
    const std::uint64_t rep_seed = Rng::mix(method_seed, static_cast<std::uint64_t>(r));
    ReplicateOutcome& cell = grid[mi][static_cast<std::size_t>(r)];
    if (!rct_reps[static_cast<std::size_t>(r)].ok) return;
    try {
      const Dataset data = r == 0 ? nrs : nrs.subset(nrs_rows[static_cast<std::size_t>(r)], true);
      const EffectEstimate est = dispatch_method(method, data, config.outcome, rep_seed);
      cell.tau = est.tau;
      cell.bias = standardized_bias(rct_reps[static_cast<std::size_t>(r)].tau, est.tau,
                                    rct_reps[static_cast<std::size_t>(r)].sd);
      cell.ok = true;
    } catch (const Error&) {
      cell.ok = false;
    } catch (const std::exception&) {
      cell.ok = false;
    }
  });

  BenchmarkReport report;
  report.seed = config.bootstrap.seed;
  report.bootstrap_reps = B;
  report.outcome = config.outcome;
  report.rct = rct_point;

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    const MethodConfig& method = config.methods[mi];
    BenchmarkRow row;
    row.method_id = method.method_id;
    row.group = to_string(method_group(method));
    row.estimand = method.estimand;
    row.settings_hash = settings_hash(method);
    row.seed = method.seed != 0 ? method.seed : Rng::mix(config.bootstrap.seed, 0xABCD + mi);

    const ReplicateOutcome& point = grid[mi][0];
    std::vector<double> taus, biases;
    for (int r = 1; r <= B; ++r) {
      const ReplicateOutcome& cell = grid[mi][static_cast<std::size_t>(r)];
      if (cell.ok) {
        taus.push_back(cell.tau);
        biases.push_back(cell.bias);
      }
    }
    row.bootstrap_failures = B - static_cast<int>(biases.size());

    if (!point.ok || biases.size() < 2) {
      row.verdict = Verdict::failed;
      row.flags.push_back("MethodFailure");
      report.rows.push_back(std::move(row));
      continue;
    }

    // Point estimate re-run to capture se/flags; se falls back to the
    // bootstrap spread when the method has no analytic standard error.
    const std::uint64_t rep0_seed = Rng::mix(row.seed, 0);
    try {
      row.obs = dispatch_method(method, nrs, config.outcome, rep0_seed);
    } catch (const std::exception&) {
      row.verdict = Verdict::failed;
      row.flags.push_back("MethodFailure");
      report.rows.push_back(std::move(row));
      continue;
    }
    if (!std::isfinite(row.obs.se)) {
      row.obs.se = sample_sd(taus);
      set_normal_ci(row.obs);
      row.obs.flags.push_back("BootstrapSe");
    }
    row.std_bias = standardized_bias(rct_point.itt.tau, row.obs.tau, rct_point.sd_control);
    std::sort(biases.begin(), biases.end());
    row.std_bias_ci = {quantile_sorted(biases, 0.025), quantile_sorted(biases, 0.975)};
    row.mse = mse_metric(row.std_bias, row.std_bias_ci);
    row.verdict = (row.std_bias_ci.first > 0.0 || row.std_bias_ci.second < 0.0) ? Verdict::x
                                                                                : Verdict::star;
    if (row.bootstrap_failures > static_cast<int>(kFailureFlagRate * B)) {
      row.flags.push_back("MethodFailure");
    }
    row.flags.insert(row.flags.end(), row.obs.flags.begin(), row.obs.flags.end());
    report.rows.push_back(std::move(row));
  }

  // Present rows grouped into the three approach panels, stable within each.
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const BenchmarkRow& a, const BenchmarkRow& b) {
                     auto rank = [](const std::string& g) {
                       if (g == "outcome_model") return 0;
                       if (g == "treatment_model") return 1;
                       return 2;
                     };
                     return rank(a.group) < rank(b.group);
                   });
  return report;
}

}  // namespace cbench
