#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbench/data.hpp"

namespace cbench {

enum class DenominatorPolicy { pooled_sd, control_sd };

std::string to_string(DenominatorPolicy policy);
DenominatorPolicy denominator_policy_from_string(const std::string& s);

struct BalanceRow {
  std::string covariate;
  double mean_t = 0.0;
  double mean_c = 0.0;
  double std_diff = 0.0;
  double p_value = 1.0;
  bool undefined = false;  // denominator was zero; std_diff not meaningful
};

// (mean_t - mean_c) / denominator, pooled_sd = sqrt((s_t^2 + s_c^2)/2).
// Throws ZeroDenominator when the chosen sd is zero.
double standardized_difference(std::span<const double> x_t, std::span<const double> x_c,
                               DenominatorPolicy policy);

// Two-sided p from the Welch unequal-variance t statistic with Satterthwaite
// degrees of freedom. Both groups constant and equal is defined as p = 1.
double welch_p_value(std::span<const double> x_t, std::span<const double> x_c);

// One row per covariate column, split by z. When weights are supplied the
// means use frequency-weight semantics and the Welch test runs on the Kish
// effective sample sizes, but std_diff denominators always come from the
// unweighted data so pre/post-adjustment rows are comparable.
std::vector<BalanceRow> balance_table(const Dataset& d,
                                      const std::optional<std::vector<double>>& weights,
                                      DenominatorPolicy policy);

}  // namespace cbench
