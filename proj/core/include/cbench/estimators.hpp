#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "cbench/data.hpp"
#include "cbench/effect.hpp"
#include "cbench/matching.hpp"

namespace cbench {

// One configured estimator run. method_id strings: regadj, ipw, aipw, ipwra,
// psmatch, nnmatch, mdmatch, cardmatch (matching ids accept a "+ra" suffix
// for post-match regression bias correction), sl_tmle, plugin:<name>.
struct MethodConfig {
  std::string method_id;
  Estimand estimand = Estimand::ATE;
  bool estimand_overridden = false;  // config explicitly chose the estimand
  nlohmann::json settings = nlohmann::json::object();
  std::uint64_t seed = 0;
};

// Table-4 style panels.
enum class MethodGroup { outcome_model, treatment_model, outcome_and_treatment };

std::string to_string(MethodGroup g);

bool is_known_method(const std::string& method_id);
MethodGroup method_group(const MethodConfig& config);
Estimand default_estimand(const std::string& method_id);

// Runs one configured method on one dataset. `seed` drives everything
// stochastic inside the method (CV folds, forest bootstraps, ...); the se of
// methods without an analytic standard error (regadj, cardmatch point runs)
// comes back NaN and is filled by the caller's bootstrap.
EffectEstimate run_method(const MethodConfig& config, const Dataset& data,
                          const std::string& outcome, std::uint64_t seed);

// Deterministic fingerprint of a method's settings for run metadata.
std::string settings_hash(const MethodConfig& config);

// True when method_id names one of the matching families.
bool is_matching_method(const std::string& method_id);

// The matching stage of a matching method, for pair export and balance
// audits. Throws for non-matching methods.
MatchResult method_match(const MethodConfig& config, const Dataset& data);

// Propensity scores the way the built-in methods fit them: main-effects
// logistic on every covariate column, truncated to the configured bounds.
Eigen::VectorXd method_pscores(const MethodConfig& config, const Dataset& data);

}  // namespace cbench
