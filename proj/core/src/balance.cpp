#include "cbench/balance.hpp"

#include <cmath>
#include <limits>

#include "cbench/error.hpp"
#include "cbench/stats.hpp"

namespace cbench {

std::string to_string(DenominatorPolicy policy) {
  return policy == DenominatorPolicy::pooled_sd ? "pooled_sd" : "control_sd";
}

DenominatorPolicy denominator_policy_from_string(const std::string& s) {
  if (s == "pooled_sd" || s == "pooled") return DenominatorPolicy::pooled_sd;
  if (s == "control_sd" || s == "control") return DenominatorPolicy::control_sd;
  fail("DomainError", "unknown denominator policy '" + s + "'");
}

namespace {

double denominator(std::span<const double> x_t, std::span<const double> x_c,
                   DenominatorPolicy policy) {
  if (policy == DenominatorPolicy::control_sd) return sample_sd(x_c);
  const double vt = sample_variance(x_t);
  const double vc = sample_variance(x_c);
  return std::sqrt(0.5 * (vt + vc));
}

}  // namespace

double standardized_difference(std::span<const double> x_t, std::span<const double> x_c,
                               DenominatorPolicy policy) {
  require(x_t.size() >= 2 && x_c.size() >= 2, "TooFewUnits",
          "standardized_difference needs n >= 2 per group");
  const double denom = denominator(x_t, x_c, policy);
  require(denom > 0.0, "ZeroDenominator", "standardized_difference denominator is zero");
  return (mean(x_t) - mean(x_c)) / denom;
}

double welch_p_value(std::span<const double> x_t, std::span<const double> x_c) {
  require(x_t.size() >= 2 && x_c.size() >= 2, "TooFewUnits",
          "welch_p_value needs n >= 2 per group");
  const double nt = static_cast<double>(x_t.size());
  const double nc = static_cast<double>(x_c.size());
  const double mt = mean(x_t);
  const double mc = mean(x_c);
  const double vt = sample_variance(x_t);
  const double vc = sample_variance(x_c);
  const double a = vt / nt;
  const double b = vc / nc;
  if (a + b == 0.0) {
    // Both groups constant: equal means is a perfect non-difference.
    return mt == mc ? 1.0 : 0.0;
  }
  const double t = (mt - mc) / std::sqrt(a + b);
  const double df = (a + b) * (a + b) / (a * a / (nt - 1.0) + b * b / (nc - 1.0));
  return student_t_two_sided_p(t, df);
}

std::vector<BalanceRow> balance_table(const Dataset& d,
                                      const std::optional<std::vector<double>>& weights,
                                      DenominatorPolicy policy) {
  const std::vector<int> treated = d.treated_indices();
  const std::vector<int> control = d.control_indices();
  require(treated.size() >= 2 && control.size() >= 2, "TooFewUnits",
          "balance_table needs n >= 2 per treatment group");
  if (weights) {
    require(weights->size() == static_cast<std::size_t>(d.n()), "DomainError",
            "weights length must equal n");
    double total = 0.0;
    for (double w : *weights) {
      require(w >= 0.0, "DomainError", "weights must be nonnegative");
      total += w;
    }
    require(total > 0.0, "DomainError", "weights must not all be zero");
  }

  auto gather = [&](const std::vector<int>& rows, int j, std::vector<double>& x,
                    std::vector<double>& w) {
    x.resize(rows.size());
    w.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x[i] = d.x(rows[i], j);
      w[i] = weights ? (*weights)[static_cast<std::size_t>(rows[i])] : 1.0;
    }
  };

  std::vector<BalanceRow> out;
  out.reserve(static_cast<std::size_t>(d.n_covariates()));
  std::vector<double> xt, wt, xc, wc;
  for (int j = 0; j < d.n_covariates(); ++j) {
    gather(treated, j, xt, wt);
    gather(control, j, xc, wc);

    BalanceRow row;
    row.covariate = d.columns()[static_cast<std::size_t>(j)].name;
    row.mean_t = weights ? weighted_mean(xt, wt) : mean(xt);
    row.mean_c = weights ? weighted_mean(xc, wc) : mean(xc);

    // Denominator from unweighted data regardless of the weights.
    const double denom = denominator(xt, xc, policy);
    if (denom > 0.0) {
      row.std_diff = (row.mean_t - row.mean_c) / denom;
    } else {
      row.std_diff = std::numeric_limits<double>::quiet_NaN();
      row.undefined = true;
    }

    if (!weights) {
      row.p_value = welch_p_value(xt, xc);
    } else {
      const double net = effective_sample_size(wt);
      const double nec = effective_sample_size(wc);
      if (net < 2.0 || nec < 2.0) {
        row.p_value = std::numeric_limits<double>::quiet_NaN();
      } else {
        const double vt = weighted_variance(xt, wt);
        const double vc = weighted_variance(xc, wc);
        const double a = vt / net;
        const double b = vc / nec;
        if (a + b == 0.0) {
          row.p_value = row.mean_t == row.mean_c ? 1.0 : 0.0;
        } else {
          const double t = (row.mean_t - row.mean_c) / std::sqrt(a + b);
          const double df =
              (a + b) * (a + b) / (a * a / (net - 1.0) + b * b / (nec - 1.0));
          row.p_value = student_t_two_sided_p(t, df);
        }
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace cbench
