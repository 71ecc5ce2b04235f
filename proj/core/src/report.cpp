#include "cbench/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cbench/error.hpp"
#include "cbench/version.hpp"

namespace cbench {

std::string json_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

nlohmann::json estimate_to_json(const EffectEstimate& e) {
  return nlohmann::json{{"tau", e.tau},          {"se", e.se},
                        {"ci", {e.ci_lo, e.ci_hi}}, {"n_used", e.n_used},
                        {"estimand", to_string(e.estimand)}, {"flags", e.flags}};
}

EffectEstimate estimate_from_json(const nlohmann::json& j) {
  EffectEstimate e;
  e.tau = j.at("tau").get<double>();
  e.se = j.at("se").get<double>();
  e.ci_lo = j.at("ci")[0].get<double>();
  e.ci_hi = j.at("ci")[1].get<double>();
  e.n_used = j.at("n_used").get<int>();
  e.estimand = estimand_from_string(j.at("estimand").get<std::string>());
  if (j.contains("flags")) e.flags = j.at("flags").get<std::vector<std::string>>();
  return e;
}

}  // namespace

nlohmann::json report_to_json(const BenchmarkReport& report, const std::string& config_hash) {
  nlohmann::json meta{
      {"seed", report.seed},
      {"bootstrap_reps", report.bootstrap_reps},
      {"outcome", report.outcome},
      {"artifact_version", kVersion},
      {"config_hash", config_hash},
  };
  meta["rct"] = estimate_to_json(report.rct.itt);
  meta["rct"]["sd_control"] = report.rct.sd_control;

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r{
        {"method_id", row.method_id},
        {"group", row.group},
        {"estimand", to_string(row.estimand)},
        {"verdict", verdict_label(row.verdict)},
        {"settings_hash", row.settings_hash},
        {"seed", row.seed},
        {"bootstrap_failures", row.bootstrap_failures},
        {"flags", row.flags},
    };
    if (row.verdict != Verdict::failed) {
      r["tau"] = row.obs.tau;
      r["se"] = row.obs.se;
      r["ci"] = {row.obs.ci_lo, row.obs.ci_hi};
      r["n_used"] = row.obs.n_used;
      r["std_bias"] = row.std_bias;
      r["std_bias_ci"] = {row.std_bias_ci.first, row.std_bias_ci.second};
      r["mse"] = row.mse;
    }
    rows.push_back(std::move(r));
  }
  return nlohmann::json{{"meta", std::move(meta)}, {"rows", std::move(rows)}};
}

BenchmarkReport report_from_json(const nlohmann::json& j) {
  BenchmarkReport report;
  const nlohmann::json& meta = j.at("meta");
  report.seed = meta.at("seed").get<std::uint64_t>();
  report.bootstrap_reps = meta.at("bootstrap_reps").get<int>();
  report.outcome = meta.at("outcome").get<std::string>();
  report.rct.itt = estimate_from_json(meta.at("rct"));
  report.rct.itt.method_id = "rct_itt";
  report.rct.sd_control = meta.at("rct").at("sd_control").get<double>();
  for (const auto& r : j.at("rows")) {
    BenchmarkRow row;
    row.method_id = r.at("method_id").get<std::string>();
    row.group = r.at("group").get<std::string>();
    row.estimand = estimand_from_string(r.at("estimand").get<std::string>());
    const std::string verdict = r.at("verdict").get<std::string>();
    row.verdict = verdict == "ok" ? Verdict::star : verdict == "BIASED" ? Verdict::x : Verdict::failed;
    row.settings_hash = r.at("settings_hash").get<std::string>();
    row.seed = r.at("seed").get<std::uint64_t>();
    row.bootstrap_failures = r.at("bootstrap_failures").get<int>();
    if (r.contains("flags")) row.flags = r.at("flags").get<std::vector<std::string>>();
    if (row.verdict != Verdict::failed) {
      row.obs.tau = r.at("tau").get<double>();
      row.obs.se = r.at("se").get<double>();
      row.obs.ci_lo = r.at("ci")[0].get<double>();
      row.obs.ci_hi = r.at("ci")[1].get<double>();
      row.obs.n_used = r.at("n_used").get<int>();
      row.obs.method_id = row.method_id;
      row.obs.estimand = row.estimand;
      row.std_bias = r.at("std_bias").get<double>();
      row.std_bias_ci = {r.at("std_bias_ci")[0].get<double>(),
                         r.at("std_bias_ci")[1].get<double>()};
      row.mse = r.at("mse").get<double>();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_report(const nlohmann::json& results, const std::string& format) {
  const BenchmarkReport report = report_from_json(results);
  std::ostringstream out;
  if (format == "csv") {
    out << "group,method,estimand,tau,se,ci_lo,ci_hi,std_bias,bias_ci_lo,bias_ci_hi,mse,verdict\n";
    for (const auto& row : report.rows) {
      out << row.group << "," << row.method_id << "," << to_string(row.estimand);
      if (row.verdict == Verdict::failed) {
        out << ",,,,,,,,," << verdict_label(row.verdict) << "\n";
        continue;
      }
      out << "," << json_number(row.obs.tau) << "," << json_number(row.obs.se) << ","
          << json_number(row.obs.ci_lo) << "," << json_number(row.obs.ci_hi) << ","
          << json_number(row.std_bias) << "," << json_number(row.std_bias_ci.first) << ","
          << json_number(row.std_bias_ci.second) << "," << json_number(row.mse) << ","
          << verdict_label(row.verdict) << "\n";
    }
    return out.str();
  }
  if (format == "md") {
    out << "# Benchmark results: " << report.outcome << "\n\n";
    out << "RCT ITT estimate " << fixed(report.rct.itt.tau, 4) << " (se "
        << fixed(report.rct.itt.se, 4) << "), control-group sd "
        << fixed(report.rct.sd_control, 4) << ", bootstrap B=" << report.bootstrap_reps
        << ", seed " << report.seed << ".\n\n";
    out << "| Group | Method | Std. bias | 95% CI | MSE | Verdict |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
      out << "| " << row.group << " | " << row.method_id << " | ";
      if (row.verdict == Verdict::failed) {
        out << "- | - | - | FAILED |\n";
        continue;
      }
      out << fixed(row.std_bias, 3) << " | [" << fixed(row.std_bias_ci.first, 3) << ", "
          << fixed(row.std_bias_ci.second, 3) << "] | " << fixed(row.mse, 3) << " | "
          << verdict_label(row.verdict) << " |\n";
    }
    return out.str();
  }
  fail("DomainError", "unknown report format '" + format + "' (expected csv or md)");
}

std::string balance_table_csv(const std::vector<BalanceRow>& rows, DenominatorPolicy policy) {
  std::ostringstream out;
  out << "covariate,treated_mean,control_mean,std_diff,p_value,denominator\n";
  for (const auto& row : rows) {
    out << row.covariate << "," << json_number(row.mean_t) << "," << json_number(row.mean_c)
        << ",";
    out << (row.undefined ? "undefined" : json_number(row.std_diff));
    out << "," << json_number(row.p_value) << "," << to_string(policy) << "\n";
  }
  return out.str();
}

}  // namespace cbench
