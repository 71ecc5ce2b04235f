#pragma once

#include <json.hpp>
#include <string>

#include "cbench/balance.hpp"
#include "cbench/harness.hpp"

namespace cbench {

// Results JSON schema: {meta: {seed, bootstrap_reps, outcome, artifact_version,
// config_hash, rct{...}}, rows: [{method_id, group, estimand, tau, se, ci,
// n_used, std_bias, std_bias_ci, mse, verdict, settings_hash, seed,
// bootstrap_failures, flags}]}.
nlohmann::json report_to_json(const BenchmarkReport& report, const std::string& config_hash);
BenchmarkReport report_from_json(const nlohmann::json& j);

// Table renderings of a results document ("csv" or "md").
std::string render_report(const nlohmann::json& results, const std::string& format);

// Balance table as CSV with the published table's columns.
std::string balance_table_csv(const std::vector<BalanceRow>& rows, DenominatorPolicy policy);

// Serialize a double so the text round-trips exactly.
std::string json_number(double v);

}  // namespace cbench
