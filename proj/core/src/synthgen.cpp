#include "cbench/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbench/error.hpp"
#include "cbench/rng.hpp"
#include "cbench/stats.hpp"

namespace cbench {

namespace {

struct ExpandedColumn {
  std::string name;
  std::string source;
  ColumnRole role;
  double center = 0.0;  // standardization offset
  double scale = 1.0;   // standardization divisor
};

struct ExpandedLayout {
  std::vector<ExpandedColumn> columns;
  // For each covariate spec: index of its first expanded column.
  std::vector<int> first_column;
};

ExpandedLayout expand_layout(const std::vector<CovariateSpec>& covariates) {
  ExpandedLayout layout;
  for (const auto& spec : covariates) {
    layout.first_column.push_back(static_cast<int>(layout.columns.size()));
    switch (spec.kind) {
      case ColumnKind::continuous: {
        require(spec.sd > 0.0, "DomainError", "covariate '" + spec.name + "' needs sd > 0");
        layout.columns.push_back({spec.name, spec.name, spec.role, spec.mean, spec.sd});
        break;
      }
      case ColumnKind::binary: {
        require(spec.p > 0.0 && spec.p < 1.0, "DomainError",
                "binary covariate '" + spec.name + "' needs p in (0,1)");
        layout.columns.push_back(
            {spec.name, spec.name, spec.role, spec.p, std::sqrt(spec.p * (1.0 - spec.p))});
        break;
      }
      case ColumnKind::categorical: {
        require(spec.levels.size() >= 2, "DomainError",
                "categorical covariate '" + spec.name + "' needs >= 2 levels");
        require(spec.levels.size() == spec.level_probs.size(), "DomainError",
                "levels/probs length mismatch for '" + spec.name + "'");
        std::vector<std::size_t> order(spec.levels.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return spec.levels[a] < spec.levels[b]; });
        double total = 0.0;
        for (double q : spec.level_probs) {
          require(q > 0.0, "DomainError", "level probabilities must be positive");
          total += q;
        }
        require(std::fabs(total - 1.0) < 1e-9, "DomainError",
                "level probabilities must sum to 1 for '" + spec.name + "'");
        // Reference level = lexicographically first; one indicator per rest.
        for (std::size_t i = 1; i < order.size(); ++i) {
          const double pl = spec.level_probs[order[i]];
          layout.columns.push_back({spec.name + "_" + spec.levels[order[i]], spec.name, spec.role,
                                    pl, std::sqrt(pl * (1.0 - pl))});
        }
        break;
      }
    }
  }
  return layout;
}

// Draws the expanded covariate row given the unit's latent severity factor f.
// Each covariate mixes f with fresh noise through its loading; a latent
// Gaussian thresholded at the level quantiles drives binary and categorical
// draws so marginal moments stay at the configured values.
void draw_covariates(const std::vector<CovariateSpec>& covariates, const ExpandedLayout& layout,
                     Rng& rng, double f, Eigen::VectorXd& raw) {
  for (std::size_t s = 0; s < covariates.size(); ++s) {
    const CovariateSpec& spec = covariates[s];
    const double lambda = spec.severity_loading;
    const double latent = lambda * f + std::sqrt(1.0 - lambda * lambda) * rng.normal();
    int j = layout.first_column[s];
    switch (spec.kind) {
      case ColumnKind::continuous:
        raw[j] = spec.mean + spec.sd * latent;
        break;
      case ColumnKind::binary:
        raw[j] = latent > normal_quantile(1.0 - spec.p) ? 1.0 : 0.0;
        break;
      case ColumnKind::categorical: {
        std::vector<std::size_t> order(spec.levels.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return spec.levels[a] < spec.levels[b]; });
        // Levels are ordinal in the latent: cut at cumulative quantiles.
        std::size_t chosen = order.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
          acc += spec.level_probs[order[i]];
          if (latent <= normal_quantile(acc)) {
            chosen = i;
            break;
          }
        }
        for (std::size_t i = 1; i < order.size(); ++i) {
          raw[j + static_cast<int>(i) - 1] = (chosen == i) ? 1.0 : 0.0;
        }
        break;
      }
    }
  }
}

Eigen::VectorXd standardize_row(const ExpandedLayout& layout, const Eigen::VectorXd& raw) {
  Eigen::VectorXd out(raw.size());
  for (int j = 0; j < raw.size(); ++j) {
    const ExpandedColumn& col = layout.columns[static_cast<std::size_t>(j)];
    out[j] = (raw[j] - col.center) / col.scale;
  }
  return out;
}

double outcome_surface(const OutcomeSpec& spec, const Eigen::VectorXd& xs, double z, double u,
                       double u_strength) {
  double v = spec.intercept + spec.baseline.dot(xs) +
             z * (spec.treatment_effect + spec.interaction.dot(xs)) +
             u_strength * spec.u_loading * u;
  if (spec.nonlinear && spec.quadratic.size() == xs.size()) {
    v += spec.quadratic.dot((xs.array().square() - 1.0).matrix());
  }
  return v;
}

void validate_config(const DgpConfig& cfg, const ExpandedLayout& layout) {
  require(cfg.n_rct >= 20 && cfg.n_nrs >= 20, "DomainError", "need n >= 20 per arm");
  require(cfg.u_strength >= 0.0, "DomainError", "u_strength must be >= 0");
  const int p = static_cast<int>(layout.columns.size());
  require(cfg.selection_coefs.size() == p, "DomainError",
          "selection_coefs must have one entry per expanded column (" + std::to_string(p) + ")");
  require(!cfg.outcomes.empty(), "DomainError", "need >= 1 outcome");
  for (const auto& o : cfg.outcomes) {
    require(o.name.rfind("y_", 0) == 0, "DomainError", "outcome names must start with y_");
    require(o.baseline.size() == p && o.interaction.size() == p, "DomainError",
            "outcome coefficient vectors must match expanded columns for " + o.name);
    require(o.noise_sd >= 0.0, "DomainError", "noise_sd must be >= 0");
  }
}

}  // namespace

std::vector<std::string> expanded_column_names(const std::vector<CovariateSpec>& covariates) {
  std::vector<std::string> names;
  for (const auto& col : expand_layout(covariates).columns) names.push_back(col.name);
  return names;
}

GenerateResult generate(const DgpConfig& cfg) {
  const ExpandedLayout layout = expand_layout(cfg.covariates);
  validate_config(cfg, layout);
  const int p = static_cast<int>(layout.columns.size());
  const int n_outcomes = static_cast<int>(cfg.outcomes.size());

  std::vector<CovariateSchema> schema;
  for (const auto& spec : cfg.covariates) {
    CovariateSchema s;
    s.name = spec.name;
    s.kind = spec.kind;
    s.levels = static_cast<int>(spec.levels.size());
    s.level_names = spec.levels;
    s.role = spec.role;
    schema.push_back(std::move(s));
  }
  std::vector<DataColumn> columns;
  for (const auto& col : layout.columns) columns.push_back({col.name, col.source, col.role});
  std::vector<std::string> outcome_names;
  for (const auto& o : cfg.outcomes) outcome_names.push_back(o.name);

  Rng master(cfg.seed);
  Rng rng_rct = master.derive(1);
  Rng rng_nrs = master.derive(2);

  GenerateResult result{
      Dataset(schema, columns, outcome_names, {}, {}, {}, Eigen::MatrixXd(0, p),
              Eigen::MatrixXd(0, n_outcomes)),
      Dataset(schema, columns, outcome_names, {}, {}, {}, Eigen::MatrixXd(0, p),
              Eigen::MatrixXd(0, n_outcomes)),
      Truth{},
      {}};

  auto make_arm = [&](Arm arm, int n, std::int64_t id_offset, Rng& rng) {
    Eigen::MatrixXd x(n, p);
    Eigen::MatrixXd y(n, n_outcomes);
    std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
    std::vector<Arm> arms(static_cast<std::size_t>(n), arm);
    std::vector<int> z(static_cast<std::size_t>(n));
    Eigen::VectorXd raw(p);
    for (int i = 0; i < n; ++i) {
      const double f = rng.normal();
      draw_covariates(cfg.covariates, layout, rng, f, raw);
      const Eigen::VectorXd xs = standardize_row(layout, raw);
      const double u = rng.normal();
      int zi;
      if (arm == Arm::RCT) {
        zi = rng.bernoulli(0.5) ? 1 : 0;
      } else {
        const double logit_p =
            cfg.selection_intercept + cfg.selection_coefs.dot(xs) + cfg.u_strength * u;
        zi = rng.bernoulli(expit(logit_p)) ? 1 : 0;
      }
      SynthUnit su;
      su.id = id_offset + i;
      su.arm = arm;
      su.z = zi;
      for (int k = 0; k < n_outcomes; ++k) {
        const OutcomeSpec& o = cfg.outcomes[static_cast<std::size_t>(k)];
        const double noise = o.noise_sd * rng.normal();
        const double y1 = outcome_surface(o, xs, 1.0, u, cfg.u_strength) + noise;
        const double y0 = outcome_surface(o, xs, 0.0, u, cfg.u_strength) + noise;
        su.y1[o.name] = y1;
        su.y0[o.name] = y0;
        y(i, k) = zi == 1 ? y1 : y0;  // consistency identity, exactly
      }
      x.row(i) = raw;
      ids[static_cast<std::size_t>(i)] = su.id;
      z[static_cast<std::size_t>(i)] = zi;
      result.potential.push_back(std::move(su));
    }
    return Dataset(schema, columns, outcome_names, std::move(ids), std::move(arms), std::move(z),
                   std::move(x), std::move(y));
  };

  result.rct = make_arm(Arm::RCT, cfg.n_rct, 0, rng_rct);
  result.nrs = make_arm(Arm::NRS, cfg.n_nrs, cfg.n_rct, rng_nrs);

  // Truth. The treatment contrast is tau + interaction . x~ (noise, baseline
  // and the confounder cancel in y1 - y0), so ATE = tau exactly; ATT needs the
  // treated-population covariate mean, by Monte Carlo unless homogeneous.
  bool any_interaction = false;
  for (const auto& o : cfg.outcomes) {
    if (o.interaction.cwiseAbs().maxCoeff() > 0.0) any_interaction = true;
  }
  Eigen::VectorXd treated_mean_xs = Eigen::VectorXd::Zero(p);
  if (any_interaction) {
    constexpr int kDraws = 1000000;
    Rng rng = master.derive(3);
    Eigen::VectorXd raw(p);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    double total_weight = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const double f = rng.normal();
      draw_covariates(cfg.covariates, layout, rng, f, raw);
      const Eigen::VectorXd xs = standardize_row(layout, raw);
      const double u = rng.normal();
      const double w =
          expit(cfg.selection_intercept + cfg.selection_coefs.dot(xs) + cfg.u_strength * u);
      acc += w * xs;
      total_weight += w;
    }
    treated_mean_xs = acc / total_weight;
  }
  for (const auto& o : cfg.outcomes) {
    OutcomeTruth t;
    t.ate = o.treatment_effect;
    t.att = o.treatment_effect + o.interaction.dot(treated_mean_xs);
    result.truth.by_outcome[o.name] = t;
  }
  return result;
}

namespace {

// Standardized difference of column j between z groups, pooled-sd denominator.
double column_std_diff(const Eigen::MatrixXd& xs, const std::vector<int>& z, int j) {
  double st = 0.0, sc = 0.0;
  int nt = 0, nc = 0;
  for (int i = 0; i < xs.rows(); ++i) {
    if (z[static_cast<std::size_t>(i)] == 1) {
      st += xs(i, j);
      ++nt;
    } else {
      sc += xs(i, j);
      ++nc;
    }
  }
  if (nt < 2 || nc < 2) return 0.0;
  const double mt = st / nt, mc = sc / nc;
  double vt = 0.0, vc = 0.0;
  for (int i = 0; i < xs.rows(); ++i) {
    if (z[static_cast<std::size_t>(i)] == 1) {
      vt += (xs(i, j) - mt) * (xs(i, j) - mt);
    } else {
      vc += (xs(i, j) - mc) * (xs(i, j) - mc);
    }
  }
  vt /= nt - 1;
  vc /= nc - 1;
  const double denom = std::sqrt(0.5 * (vt + vc));
  return denom > 0.0 ? (mt - mc) / denom : 0.0;
}

}  // namespace

Eigen::VectorXd calibrate_to_targets(const DgpConfig& base,
                                     const std::map<std::string, double>& targets,
                                     const CalibrationOptions& options) {
  const ExpandedLayout layout = expand_layout(base.covariates);
  const int p = static_cast<int>(layout.columns.size());
  require(!targets.empty(), "DomainError", "calibrate_to_targets needs >= 1 target");

  std::vector<int> target_cols;
  std::vector<double> target_vals;
  for (const auto& [name, value] : targets) {
    int found = -1;
    for (int j = 0; j < p; ++j) {
      if (layout.columns[static_cast<std::size_t>(j)].name == name) found = j;
    }
    require(found >= 0, "MissingColumn", "target covariate '" + name + "' not found");
    target_cols.push_back(found);
    target_vals.push_back(value);
  }

  // Fixed standardized covariate draws and selection uniforms: each candidate
  // coefficient vector is evaluated on the same randomness, so the achieved
  // std_diff is a deterministic, monotone function of each coefficient.
  const int n = options.n_calibration;
  Rng rng(options.seed);
  Eigen::MatrixXd xs(n, p);
  Eigen::VectorXd raw(p), us(n), uz(n);
  for (int i = 0; i < n; ++i) {
    const double f = rng.normal();
    draw_covariates(base.covariates, layout, rng, f, raw);
    xs.row(i) = standardize_row(layout, raw);
    us[i] = rng.normal();
    uz[i] = rng.uniform01();
  }

  Eigen::VectorXd coefs = base.selection_coefs.size() == p
                              ? base.selection_coefs
                              : Eigen::VectorXd::Zero(p);
  double intercept = base.selection_intercept;

  // lin tracks xs * coefs so single-coefficient probes cost O(n), not O(n p).
  Eigen::VectorXd lin = xs * coefs;
  std::vector<int> z(static_cast<std::size_t>(n));
  auto assign_with = [&](double alpha, int j, double beta_j) {
    const double shift = j >= 0 ? beta_j - coefs[j] : 0.0;
    for (int i = 0; i < n; ++i) {
      const double eta = alpha + lin[i] + (j >= 0 ? shift * xs(i, j) : 0.0) +
                         base.u_strength * us[i];
      z[static_cast<std::size_t>(i)] = uz[i] <= expit(eta) ? 1 : 0;
    }
  };
  auto treat_rate = [&]() {
    double s = 0.0;
    for (int v : z) s += v;
    return s / n;
  };

  auto calibrate_intercept = [&]() {
    double lo = -8.0, hi = 8.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      assign_with(mid, -1, 0.0);
      (treat_rate() < options.target_treat_rate ? lo : hi) = mid;
    }
    intercept = 0.5 * (lo + hi);
  };

  // Damped Gauss-Seidel: every selection coefficient inflates the linear
  // predictor and dilutes every other covariate's standardized difference, so
  // full coordinate bisections chase each other up an (asymptotically
  // scale-invariant) ridge and diverge. Moving only partway toward each
  // coordinate's bisection solution settles on the minimum-scale solution.
  constexpr double kDamping = 0.5;
  calibrate_intercept();
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (std::size_t t = 0; t < target_cols.size(); ++t) {
      const int j = target_cols[t];
      const double target = target_vals[t];
      auto achieved = [&](double beta_j) {
        assign_with(intercept, j, beta_j);
        return column_std_diff(xs, z, j);
      };
      double lo = -options.bracket, hi = options.bracket;
      if (target < achieved(lo) - options.tol || target > achieved(hi) + options.tol) {
        fail("Unachievable", "target std_diff " + std::to_string(target) + " for '" +
                                 layout.columns[static_cast<std::size_t>(j)].name +
                                 "' is outside the achievable range under logistic selection");
      }
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (achieved(mid) < target ? lo : hi) = mid;
      }
      const double solved = 0.5 * (lo + hi);
      const double updated = coefs[j] + kDamping * (solved - coefs[j]);
      lin += (updated - coefs[j]) * xs.col(j);
      coefs[j] = updated;
    }
    calibrate_intercept();

    assign_with(intercept, -1, 0.0);
    double worst = 0.0;
    for (std::size_t t = 0; t < target_cols.size(); ++t) {
      worst = std::max(worst,
                       std::fabs(column_std_diff(xs, z, target_cols[t]) - target_vals[t]));
    }
    if (worst <= options.tol) return coefs;
  }
  fail("Unachievable", "calibration failed to converge within the sweep limit");
}

namespace {

struct PresetColumn {
  const char* expanded_name;
  double target_std_diff;
  double calibrated_coef;
};

// Selection coefficients calibrated once against the published NRS column
// (tol 0.02 at n = 100000, seed 20240001, treated share 261/453); frozen here
// so the preset is deterministic and cheap to construct.
constexpr PresetColumn kRefluxColumns[] = {
    {"age", -0.32, -0.1387586730},
    {"female", -0.11, -0.1573021190},
    {"duration", 0.03, 0.0461497595},
    {"bmi", 0.28, 0.1435280783},
    {"employment_cat2", 0.15, 0.2287733478},
    {"employment_cat3", -0.37, -0.1226661395},
    {"education_cat2", 0.09, 0.1201289605},
    {"education_cat3", -0.22, -0.1160145709},
    {"heartburn", -1.08, -0.8983962384},
    {"gastro", -0.59, -0.0779266394},
    {"nausea", -0.77, -0.3233378698},
    {"reflux_activity", -0.88, -0.3715012489},
    {"gastro1", -0.45, 0.0902508610},
    {"health_quality", -0.31, 0.0767540065},
};
constexpr double kRefluxIntercept = 0.4322045972;

}  // namespace

const std::map<std::string, double>& reflux_like_targets() {
  static const std::map<std::string, double> targets = [] {
    std::map<std::string, double> t;
    for (const auto& col : kRefluxColumns) t[col.expanded_name] = col.target_std_diff;
    return t;
  }();
  return targets;
}

DgpConfig reflux_like_preset(const RefluxOptions& options) {
  DgpConfig cfg;
  cfg.n_rct = options.n_rct;
  cfg.n_nrs = options.n_nrs;
  cfg.u_strength = options.u_strength;
  cfg.seed = options.seed;

  auto cont = [](const char* name, double mean, double sd, double loading) {
    CovariateSpec s;
    s.name = name;
    s.kind = ColumnKind::continuous;
    s.mean = mean;
    s.sd = sd;
    s.severity_loading = loading;
    return s;
  };
  auto bin = [](const char* name, double p, double loading) {
    CovariateSpec s;
    s.name = name;
    s.kind = ColumnKind::binary;
    s.p = p;
    s.severity_loading = loading;
    return s;
  };
  auto cat3 = [](const char* name, double p1, double p2, double p3, double loading) {
    CovariateSpec s;
    s.name = name;
    s.kind = ColumnKind::categorical;
    s.levels = {"cat1", "cat2", "cat3"};
    s.level_probs = {p1, p2, p3};
    s.severity_loading = loading;
    return s;
  };

  // Population moments back-solved from the published group means at the
  // 261/453 treated share; symptom-scale sds from mean gap / std_diff. The
  // severity loadings give the symptom block the co-movement that makes the
  // published imbalances reachable by one selection index.
  cfg.covariates = {
      cont("age", 46.833, 11.97, 0.25),
      bin("female", 0.4012, 0.0),
      cont("duration", 27.588, 15.0, 0.0),
      cont("bmi", 52.083, 63.0, -0.20),
      cat3("employment", 0.5934, 0.1346, 0.2720, 0.35),
      cat3("education", 0.5388, 0.2573, 0.2039, 0.15),
      cont("heartburn", 59.625, 23.04, 0.80),
      cont("gastro", 53.266, 22.02, 0.60),
      cont("nausea", 82.837, 16.60, 0.65),
      cont("reflux_activity", 79.840, 14.40, 0.75),
      cont("gastro1", 78.632, 20.09, 0.55),
      cont("health_quality", 0.7097, 0.2258, 0.40),
  };

  const std::vector<std::string> names = expanded_column_names(cfg.covariates);
  const int p = static_cast<int>(names.size());
  auto index_of = [&](const std::string& name) {
    for (int j = 0; j < p; ++j) {
      if (names[static_cast<std::size_t>(j)] == name) return j;
    }
    fail("MissingColumn", "preset column '" + name + "' missing");
  };

  cfg.selection_intercept = kRefluxIntercept;
  cfg.selection_coefs = Eigen::VectorXd::Zero(p);
  for (const auto& col : kRefluxColumns) {
    cfg.selection_coefs[index_of(col.expanded_name)] = col.calibrated_coef;
  }

  auto loadings = [&](std::initializer_list<std::pair<const char*, double>> entries) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    for (const auto& [name, value] : entries) v[index_of(name)] = value;
    return v;
  };

  OutcomeSpec health;
  health.name = "y_health";
  health.intercept = 0.71;
  health.baseline = loadings({{"health_quality", 0.10},
                              {"heartburn", -0.04},
                              {"reflux_activity", -0.03},
                              {"nausea", -0.02},
                              {"gastro", -0.015},
                              {"gastro1", -0.015},
                              {"age", -0.01},
                              {"bmi", -0.005}});
  health.treatment_effect = 0.10;
  health.interaction = Eigen::VectorXd::Zero(p);
  health.nonlinear = options.nonlinear_outcomes;
  health.quadratic = loadings({{"heartburn", 0.02}, {"reflux_activity", 0.015}});
  health.noise_sd = 0.2;
  health.u_loading = 0.2;

  OutcomeSpec qol;
  qol.name = "y_qol";
  qol.intercept = 80.0;
  qol.baseline = loadings({{"heartburn", 6.0},
                           {"reflux_activity", 6.0},
                           {"gastro", 3.0},
                           {"nausea", 2.0},
                           {"gastro1", 2.0},
                           {"health_quality", 3.0},
                           {"age", -1.0},
                           {"bmi", 0.5},
                           {"duration", 0.3},
                           {"female", -0.5},
                           {"employment_cat2", 0.3},
                           {"employment_cat3", -0.5},
                           {"education_cat2", 0.2},
                           {"education_cat3", -0.4}});
  qol.treatment_effect = 5.0;
  qol.interaction = Eigen::VectorXd::Zero(p);
  qol.nonlinear = options.nonlinear_outcomes;
  qol.quadratic = loadings({{"heartburn", 2.0}, {"reflux_activity", 1.5}});
  qol.noise_sd = 15.0;
  qol.u_loading = 15.0;

  cfg.outcomes = {health, qol};
  return cfg;
}

}  // namespace cbench
