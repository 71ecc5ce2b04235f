#include "cbench/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cbench/balance.hpp"
#include "cbench/error.hpp"
#include "cbench/learners.hpp"
#include "cbench/linear_model.hpp"
#include "cbench/matching.hpp"
#include "cbench/propensity.hpp"
#include "cbench/rng.hpp"
#include "cbench/super_learner.hpp"
#include "cbench/tmle.hpp"
#include "cbench/weighting.hpp"

namespace cbench {

namespace {

struct ParsedId {
  std::string base;
  bool bias_correct = false;
  bool plugin = false;
  std::string plugin_name;
};

ParsedId parse_method_id(const std::string& id) {
  ParsedId p;
  p.base = id;
  if (p.base.rfind("plugin:", 0) == 0) {
    p.plugin = true;
    p.plugin_name = p.base.substr(7);
    require(!p.plugin_name.empty(), "DomainError", "plugin method needs a name");
    return p;
  }
  for (const char* suffix : {"+ra", ",bias_correct"}) {
    const std::string s(suffix);
    if (p.base.size() > s.size() && p.base.compare(p.base.size() - s.size(), s.size(), s) == 0) {
      p.bias_correct = true;
      p.base = p.base.substr(0, p.base.size() - s.size());
      break;
    }
  }
  return p;
}

bool is_matching_base(const std::string& base) {
  return base == "psmatch" || base == "nnmatch" || base == "mdmatch" || base == "cardmatch";
}

double setting_num(const nlohmann::json& settings, const char* key, double fallback) {
  if (settings.contains(key)) return settings.at(key).get<double>();
  return fallback;
}

std::string setting_str(const nlohmann::json& settings, const char* key,
                        const std::string& fallback) {
  if (settings.contains(key)) return settings.at(key).get<std::string>();
  return fallback;
}

Eigen::VectorXd fit_scores(const Dataset& d, const nlohmann::json& settings) {
  LogisticConfig config;
  config.ridge = setting_num(settings, "ridge", 1e-8);
  const LogisticModel model = fit_logistic_irls(d.covariates(), d.treatment(), config);
  Eigen::VectorXd e = predict_propensity(model, d.covariates());
  return truncate_scores(e, setting_num(settings, "truncate_lo", 0.01),
                         setting_num(settings, "truncate_hi", 0.99));
}

// Per-arm linear outcome fits evaluated on every unit.
void outcome_model_predictions(const Dataset& d, const std::string& outcome, Eigen::VectorXd* mu1,
                               Eigen::VectorXd* mu0) {
  const std::vector<int> treated = d.treated_indices();
  const std::vector<int> control = d.control_indices();
  require(!treated.empty() && !control.empty(), "DegenerateArm", "need both groups");
  const Eigen::VectorXd y = d.outcome(outcome);
  auto fit_group = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd x(static_cast<int>(rows.size()), d.n_covariates());
    Eigen::VectorXd yy(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<int>(i)) = d.covariates().row(rows[i]);
      yy[static_cast<int>(i)] = y[rows[i]];
    }
    return fit_ols(x, yy);
  };
  *mu1 = fit_group(treated).predict(d.covariates());
  *mu0 = fit_group(control).predict(d.covariates());
}

MatchResult run_match(const ParsedId& id, const MethodConfig& config, const Dataset& d) {
  const nlohmann::json& settings = config.settings;
  if (id.base == "cardmatch") {
    std::vector<BalanceConstraint> constraints;
    const double threshold = setting_num(settings, "max_abs_std_diff", 0.1);
    if (settings.contains("constraints")) {
      for (const auto& c : settings.at("constraints")) {
        constraints.push_back(
            {c.at("covariate").get<std::string>(),
             c.contains("max_abs_std_diff") ? c.at("max_abs_std_diff").get<double>() : threshold});
      }
    } else {
      for (const auto& col : d.columns()) {
        if (col.role == ColumnRole::center_indicator) continue;
        constraints.push_back({col.name, threshold});
      }
    }
    CardinalityConfig solver;
    solver.time_limit_seconds = setting_num(settings, "time_limit_seconds", 10.0);
    solver.max_nodes = static_cast<std::int64_t>(
        setting_num(settings, "max_nodes", static_cast<double>(solver.max_nodes)));
    return cardinality_match(d, constraints, solver);
  }

  DistanceSpec spec;
  Eigen::VectorXd scores;
  bool have_scores = false;
  if (id.base == "psmatch") {
    spec.metric = setting_str(settings, "scale", "pscore") == "logit"
                      ? DistanceMetric::pscore_linear
                      : DistanceMetric::pscore_abs_diff;
  } else {
    spec.metric = DistanceMetric::mahalanobis;
  }
  const double caliper_default = id.base == "mdmatch" ? 0.2 : 0.0;
  const double caliper = setting_num(settings, "caliper_sd", caliper_default);
  if (caliper > 0.0) spec.caliper = Caliper{caliper};
  if (spec.metric != DistanceMetric::mahalanobis || spec.caliper) {
    scores = fit_scores(d, settings);
    have_scores = true;
  }

  const DistanceMatrix dm = distance_matrix(d, spec, have_scores ? &scores : nullptr);
  Assignment assignment;
  const std::string algorithm =
      setting_str(settings, "algorithm", id.base == "mdmatch" ? "optimal" : "greedy");
  if (algorithm == "optimal") {
    assignment = optimal_pair_match(dm.d);
  } else {
    GreedyOrder order = setting_str(settings, "order", "data_order") == "largest_pscore_first"
                            ? GreedyOrder::largest_pscore_first
                            : GreedyOrder::data_order;
    Eigen::VectorXd treated_scores;
    if (order == GreedyOrder::largest_pscore_first) {
      require(have_scores, "DomainError", "largest_pscore_first needs a pscore metric");
      treated_scores.resize(static_cast<int>(dm.treated_rows.size()));
      for (std::size_t i = 0; i < dm.treated_rows.size(); ++i) {
        treated_scores[static_cast<int>(i)] = scores[dm.treated_rows[i]];
      }
    }
    assignment = greedy_nn_match(dm.d, order,
                                 order == GreedyOrder::largest_pscore_first ? &treated_scores
                                                                            : nullptr);
  }
  return to_match_result(assignment, dm, d);
}

EffectEstimate run_sl_tmle(const MethodConfig& config, const Dataset& d,
                           const std::string& outcome, std::uint64_t seed) {
  const nlohmann::json& settings = config.settings;
  std::vector<LearnerSpec> learners;
  std::vector<std::string> names;
  if (settings.contains("learners")) {
    for (const auto& l : settings.at("learners")) names.push_back(l.get<std::string>());
  } else {
    names = {"forest", "lasso", "boost"};
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    LearnerSpec spec;
    spec.kind = learner_kind_from_string(names[j]);
    spec.seed = Rng::mix(seed, 77001ULL + j);
    if (settings.contains("hyperparameters") && settings.at("hyperparameters").contains(names[j])) {
      for (const auto& [key, value] : settings.at("hyperparameters").at(names[j]).items()) {
        spec.hyperparameters[key] = value.get<double>();
      }
    }
    learners.push_back(std::move(spec));
  }
  const int folds = static_cast<int>(setting_num(settings, "folds", 10));

  // Outcome regression on (z, x) with z-stratified folds; counterfactual
  // predictions flip the treatment column.
  const int n = d.n();
  const int p = d.n_covariates();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0) = d.treatment();
  design.rightCols(p) = d.covariates();
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = d.z(i);

  SuperLearner sl;
  sl.fit(learners, design, d.outcome(outcome), folds, Rng::mix(seed, 5150), &strata);

  Eigen::MatrixXd design1 = design, design0 = design;
  design1.col(0).setOnes();
  design0.col(0).setZero();
  const Eigen::VectorXd mu1 = sl.predict(design1);
  const Eigen::VectorXd mu0 = sl.predict(design0);
  const Eigen::VectorXd e = fit_scores(d, settings);

  TmleConfig tmle_config;
  tmle_config.truncate_lo = setting_num(settings, "truncate_lo", 0.01);
  tmle_config.truncate_hi = setting_num(settings, "truncate_hi", 0.99);
  const TmleResult result = tmle(d.outcome(outcome), d.treatment(), mu1, mu0, e, config.estimand,
                                 tmle_config);

  EffectEstimate out;
  out.method_id = config.method_id;
  out.estimand = config.estimand;
  out.tau = result.psi;
  out.se = result.se;
  set_normal_ci(out);
  out.n_used = n;
  out.flags = result.flags;
  return out;
}

}  // namespace

std::string to_string(MethodGroup g) {
  switch (g) {
    case MethodGroup::outcome_model: return "outcome_model";
    case MethodGroup::treatment_model: return "treatment_model";
    case MethodGroup::outcome_and_treatment: return "outcome_and_treatment";
  }
  return "unknown";
}

bool is_known_method(const std::string& method_id) {
  const ParsedId p = parse_method_id(method_id);
  if (p.plugin) return true;
  if (p.bias_correct) return is_matching_base(p.base);
  return p.base == "regadj" || p.base == "ipw" || p.base == "aipw" || p.base == "ipwra" ||
         p.base == "sl_tmle" || is_matching_base(p.base);
}

MethodGroup method_group(const MethodConfig& config) {
  if (config.settings.contains("group")) {
    const std::string g = config.settings.at("group").get<std::string>();
    if (g == "outcome_model") return MethodGroup::outcome_model;
    if (g == "treatment_model") return MethodGroup::treatment_model;
    if (g == "outcome_and_treatment") return MethodGroup::outcome_and_treatment;
    fail("DomainError", "unknown method group '" + g + "'");
  }
  const ParsedId p = parse_method_id(config.method_id);
  if (p.plugin) return MethodGroup::outcome_and_treatment;
  if (p.bias_correct || p.base == "aipw" || p.base == "ipwra" || p.base == "sl_tmle") {
    return MethodGroup::outcome_and_treatment;
  }
  if (p.base == "regadj") return MethodGroup::outcome_model;
  return MethodGroup::treatment_model;
}

Estimand default_estimand(const std::string& method_id) {
  const ParsedId p = parse_method_id(method_id);
  if (is_matching_base(p.base)) return Estimand::ATT;
  return Estimand::ATE;
}

EffectEstimate run_method(const MethodConfig& config, const Dataset& d,
                          const std::string& outcome, std::uint64_t seed) {
  require(is_known_method(config.method_id), "UnknownMethod",
          "no method registered as '" + config.method_id + "'");
  const ParsedId id = parse_method_id(config.method_id);
  require(!id.plugin, "DomainError",
          "plugin methods run through the benchmark harness, not run_method");

  EffectEstimate out;
  if (id.base == "regadj") {
    out = regression_adjustment(d, outcome, config.estimand);
  } else if (id.base == "ipw" || id.base == "ipwra") {
    const Eigen::VectorXd e = fit_scores(d, config.settings);
    WeightOptions options;
    options.normalize = setting_num(config.settings, "normalize", 1.0) != 0.0;
    const WeightVector w = make_weights(d.treatment(), e, config.estimand, options);
    out = id.base == "ipw" ? ipw_estimate(d, outcome, w)
                           : ipw_regression_estimate(d, outcome, w);
  } else if (id.base == "aipw") {
    const Eigen::VectorXd e = fit_scores(d, config.settings);
    Eigen::VectorXd mu1, mu0;
    outcome_model_predictions(d, outcome, &mu1, &mu0);
    out = aipw_estimate(d, outcome, e, mu1, mu0, config.estimand);
  } else if (id.base == "sl_tmle") {
    out = run_sl_tmle(config, d, outcome, seed);
  } else {
    MatchResult match = run_match(id, config, d);
    out = id.bias_correct ? bias_corrected_estimate(match, d, outcome)
                          : matched_pair_estimate(match, d, outcome);
    out.flags.insert(out.flags.end(), match.flags.begin(), match.flags.end());
  }
  out.method_id = config.method_id;
  out.estimand = config.estimand;
  return out;
}

bool is_matching_method(const std::string& method_id) {
  const ParsedId p = parse_method_id(method_id);
  return !p.plugin && is_matching_base(p.base);
}

MatchResult method_match(const MethodConfig& config, const Dataset& data) {
  const ParsedId id = parse_method_id(config.method_id);
  require(!id.plugin && is_matching_base(id.base), "DomainError",
          "'" + config.method_id + "' is not a matching method");
  return run_match(id, config, data);
}

Eigen::VectorXd method_pscores(const MethodConfig& config, const Dataset& data) {
  return fit_scores(data, config.settings);
}

std::string settings_hash(const MethodConfig& config) {
  const std::string dump = config.settings.dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cbench
