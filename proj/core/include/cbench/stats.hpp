#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace cbench {

inline double expit(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p);

double mean(std::span<const double> x);
// Sample (n-1) variance / standard deviation.
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);

// wmean = sum(w x)/sum(w). wvar is the weighted population variance with an
// effective-sample-size small-sample correction, ESS/(ESS-1); it is invariant
// to rescaling the weights and reduces exactly to the (n-1) sample variance
// for unit weights and for 0/1 frequency weights.
double weighted_mean(std::span<const double> x, std::span<const double> w);
double weighted_variance(std::span<const double> x, std::span<const double> w);
// Kish effective sample size (sum w)^2 / sum(w^2).
double effective_sample_size(std::span<const double> w);

double normal_cdf(double x);
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Student-t distribution with (possibly fractional) df degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double p, double df);

// Type-7 (linear interpolation) quantile of a pre-sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> x, double p);

}  // namespace cbench
