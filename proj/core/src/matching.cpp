#include "cbench/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbench/error.hpp"
#include "cbench/linear_model.hpp"
#include "cbench/stats.hpp"

namespace cbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd mahalanobis_inverse(const Dataset& d, const std::vector<int>& cols) {
  const std::vector<int> treated = d.treated_indices();
  const std::vector<int> control = d.control_indices();
  require(treated.size() >= 2 && control.size() >= 2, "TooFewUnits",
          "mahalanobis needs n >= 2 per group");
  const int p = static_cast<int>(cols.size());

  auto group_cov = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd x(static_cast<int>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int j = 0; j < p; ++j) x(static_cast<int>(i), j) = d.x(rows[i], cols[static_cast<std::size_t>(j)]);
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
    return Eigen::MatrixXd(x.transpose() * x);
  };

  const double denom = static_cast<double>(treated.size() + control.size() - 2);
  Eigen::MatrixXd cov = (group_cov(treated) + group_cov(control)) / denom;

  // Ridge repair, escalating toward a hard failure.
  const double scale = std::max(cov.trace() / p, 1e-300);
  for (double eps : {0.0, 1e-8, 1e-6, 1e-4, 1e-2}) {
    Eigen::MatrixXd attempt = cov;
    attempt.diagonal().array() += eps * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
      if (inv.allFinite()) return inv;
    }
  }
  fail("SingularCovariance", "pooled covariance not invertible after ridge repair");
}

}  // namespace

DistanceMatrix distance_matrix(const Dataset& d, const DistanceSpec& spec,
                               const Eigen::VectorXd* pscores) {
  DistanceMatrix out;
  out.treated_rows = d.treated_indices();
  out.control_rows = d.control_indices();
  require(!out.treated_rows.empty() && !out.control_rows.empty(), "DegenerateArm",
          "distance_matrix needs both treated and control units");

  const bool needs_scores =
      spec.metric != DistanceMetric::mahalanobis || spec.caliper.has_value();
  Eigen::VectorXd logit_e;
  if (needs_scores) {
    require(pscores != nullptr, "DomainError", "this distance spec requires propensity scores");
    require(pscores->size() == d.n(), "DomainError", "pscores length must equal n");
    logit_e.resize(d.n());
    for (int i = 0; i < d.n(); ++i) logit_e[i] = logit((*pscores)[i]);
  }

  double caliper_bound = kInf;
  if (spec.caliper) {
    require(spec.caliper->width > 0.0, "DomainError", "caliper width must be > 0");
    std::vector<double> all(logit_e.data(), logit_e.data() + logit_e.size());
    caliper_bound = spec.caliper->width * sample_sd(all);
  }

  const int nt = static_cast<int>(out.treated_rows.size());
  const int nc = static_cast<int>(out.control_rows.size());
  out.d.resize(nt, nc);

  if (spec.metric == DistanceMetric::mahalanobis) {
    std::vector<int> cols;
    for (int j = 0; j < d.n_covariates(); ++j) {
      if (!spec.include_center_indicators &&
          d.columns()[static_cast<std::size_t>(j)].role == ColumnRole::center_indicator) {
        continue;
      }
      cols.push_back(j);
    }
    require(!cols.empty(), "DomainError", "no covariates available for mahalanobis distance");
    const Eigen::MatrixXd inv = mahalanobis_inverse(d, cols);
    const int p = static_cast<int>(cols.size());
    Eigen::VectorXd xt(p), xc(p);
    for (int i = 0; i < nt; ++i) {
      for (int j = 0; j < p; ++j) xt[j] = d.x(out.treated_rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
      for (int k = 0; k < nc; ++k) {
        for (int j = 0; j < p; ++j) xc[j] = d.x(out.control_rows[static_cast<std::size_t>(k)], cols[static_cast<std::size_t>(j)]);
        const Eigen::VectorXd diff = xt - xc;
        out.d(i, k) = std::sqrt(std::max(0.0, diff.dot(inv * diff)));
      }
    }
  } else {
    for (int i = 0; i < nt; ++i) {
      const int ti = out.treated_rows[static_cast<std::size_t>(i)];
      for (int k = 0; k < nc; ++k) {
        const int ci = out.control_rows[static_cast<std::size_t>(k)];
        if (spec.metric == DistanceMetric::pscore_abs_diff) {
          out.d(i, k) = std::fabs((*pscores)[ti] - (*pscores)[ci]);
        } else {
          out.d(i, k) = std::fabs(logit_e[ti] - logit_e[ci]);
        }
      }
    }
  }

  if (spec.caliper) {
    for (int i = 0; i < nt; ++i) {
      const int ti = out.treated_rows[static_cast<std::size_t>(i)];
      for (int k = 0; k < nc; ++k) {
        const int ci = out.control_rows[static_cast<std::size_t>(k)];
        if (std::fabs(logit_e[ti] - logit_e[ci]) > caliper_bound) out.d(i, k) = kInf;
      }
    }
  }
  return out;
}

Assignment greedy_nn_match(const Eigen::MatrixXd& D, GreedyOrder order,
                           const Eigen::VectorXd* treated_pscores) {
  const int nt = static_cast<int>(D.rows());
  const int nc = static_cast<int>(D.cols());
  std::vector<int> rows(static_cast<std::size_t>(nt));
  std::iota(rows.begin(), rows.end(), 0);
  if (order == GreedyOrder::largest_pscore_first) {
    require(treated_pscores != nullptr && treated_pscores->size() == nt, "DomainError",
            "largest_pscore_first needs one pscore per treated row");
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
      return (*treated_pscores)[a] > (*treated_pscores)[b];
    });
  }

  Assignment out;
  std::vector<bool> used(static_cast<std::size_t>(nc), false);
  for (int r : rows) {
    int best = -1;
    double best_d = kInf;
    for (int c = 0; c < nc; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const double dist = D(r, c);
      if (dist < best_d) {  // strict: ties keep the lowest column index
        best_d = dist;
        best = c;
      }
    }
    if (best < 0 || !std::isfinite(best_d)) {
      out.unmatched_rows.push_back(r);
      continue;
    }
    used[static_cast<std::size_t>(best)] = true;
    out.pairs.emplace_back(r, best);
    out.objective += best_d;
  }
  std::sort(out.unmatched_rows.begin(), out.unmatched_rows.end());
  return out;
}

MatchResult to_match_result(const Assignment& a, const DistanceMatrix& dm, const Dataset& d) {
  MatchResult out;
  out.objective = a.objective;
  for (const auto& [r, c] : a.pairs) {
    out.pairs.push_back({d.id(dm.treated_rows[static_cast<std::size_t>(r)]),
                         d.id(dm.control_rows[static_cast<std::size_t>(c)]), dm.d(r, c)});
  }
  for (int r : a.unmatched_rows) {
    out.unmatched_treated.push_back(d.id(dm.treated_rows[static_cast<std::size_t>(r)]));
  }
  return out;
}

std::vector<int> matched_sample_rows(const MatchResult& match, const Dataset& d) {
  std::vector<int> rows;
  rows.reserve(2 * match.pairs.size());
  for (const auto& pair : match.pairs) {
    rows.push_back(d.index_of_id(pair.treated_id));
    rows.push_back(d.index_of_id(pair.control_id));
  }
  return rows;
}

std::vector<double> matched_sample_weights(const MatchResult& match, const Dataset& d) {
  std::vector<double> w(static_cast<std::size_t>(d.n()), 0.0);
  for (int r : matched_sample_rows(match, d)) w[static_cast<std::size_t>(r)] = 1.0;
  return w;
}

EffectEstimate matched_pair_estimate(const MatchResult& match, const Dataset& d,
                                     const std::string& outcome) {
  require(match.pairs.size() >= 2, "TooFewPairs", "matched_pair_estimate needs >= 2 pairs");
  const Eigen::VectorXd y = d.outcome(outcome);
  std::vector<double> diffs;
  diffs.reserve(match.pairs.size());
  for (const auto& pair : match.pairs) {
    diffs.push_back(y[d.index_of_id(pair.treated_id)] - y[d.index_of_id(pair.control_id)]);
  }
  EffectEstimate e;
  e.method_id = "matched_pairs";
  e.estimand = Estimand::ATT;
  e.tau = mean(diffs);
  e.se = sample_sd(diffs) / std::sqrt(static_cast<double>(diffs.size()));
  set_normal_ci(e);
  e.n_used = static_cast<int>(2 * match.pairs.size());
  return e;
}

EffectEstimate bias_corrected_estimate(const MatchResult& match, const Dataset& d,
                                       const std::string& outcome) {
  const std::vector<int> rows = matched_sample_rows(match, d);
  const int m = static_cast<int>(rows.size());
  const int p = d.n_covariates();
  require(m > p + 2, "TooFewPairs", "matched sample must exceed #covariates + 2");

  const Eigen::VectorXd y_all = d.outcome(outcome);
  Eigen::MatrixXd design(m, p + 1);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    design(i, 0) = d.z(r);
    design.row(i).tail(p) = d.covariates().row(r);
    y[i] = y_all[r];
  }
  const LinearModel fit = fit_ols(design, y);
  require(!fit.ridge_fallback, "RankDeficient",
          "bias-corrected design is rank deficient on the matched sample");

  EffectEstimate e;
  e.method_id = "matched_pairs+ra";
  e.estimand = Estimand::ATT;
  e.tau = fit.coefficients[1];  // z sits right after the intercept
  e.se = std::sqrt(std::max(0.0, fit.vcov(1, 1)));
  set_normal_ci(e);
  e.n_used = m;
  return e;
}

}  // namespace cbench
