#include "cbench/tmle.hpp"

#include <cmath>

#include "cbench/error.hpp"
#include "cbench/stats.hpp"

namespace cbench {

namespace {

constexpr double kMuFloor = 1e-6;

double clip01(double v) { return std::min(1.0 - kMuFloor, std::max(kMuFloor, v)); }

}  // namespace

TmleResult tmle(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const Eigen::VectorXd& mu1,
                const Eigen::VectorXd& mu0, const Eigen::VectorXd& e, Estimand estimand,
                const TmleConfig& config) {
  const int n = static_cast<int>(y.size());
  require(n >= 2, "TooFewUnits", "tmle needs n >= 2");
  require(z.size() == n && mu1.size() == n && mu0.size() == n && e.size() == n, "DomainError",
          "tmle: input length mismatch");

  TmleResult out;
  out.scale_lo = y.minCoeff();
  out.scale_hi = y.maxCoeff();
  const double scale = out.scale_hi - out.scale_lo;
  if (scale <= 0.0) {
    out.flags.push_back("DegenerateOutcome");
    return out;  // constant outcome: zero effect, zero everything
  }

  const double pz = z.mean();
  require(pz > 0.0 && pz < 1.0, "ConstantTreatment", "tmle needs both treatment groups");

  Eigen::VectorXd ys(n), m1(n), m0(n), et(n), h_obs(n), h1(n), h0(n);
  for (int i = 0; i < n; ++i) {
    ys[i] = (y[i] - out.scale_lo) / scale;
    m1[i] = clip01((mu1[i] - out.scale_lo) / scale);
    m0[i] = clip01((mu0[i] - out.scale_lo) / scale);
    et[i] = std::min(config.truncate_hi, std::max(config.truncate_lo, e[i]));
    if (estimand == Estimand::ATE) {
      h1[i] = 1.0 / et[i];
      h0[i] = -1.0 / (1.0 - et[i]);
    } else {
      h1[i] = 1.0 / pz;
      h0[i] = -et[i] / ((1.0 - et[i]) * pz);
    }
    h_obs[i] = z[i] == 1.0 ? h1[i] : h0[i];
  }

  auto contrast = [&](double eps) {
    double acc = 0.0, denom = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u1 = expit(logit(m1[i]) + eps * h1[i]);
      const double u0 = expit(logit(m0[i]) + eps * h0[i]);
      if (estimand == Estimand::ATE) {
        acc += u1 - u0;
        denom += 1.0;
      } else if (z[i] == 1.0) {
        acc += u1 - u0;
        denom += 1.0;
      }
    }
    return acc / denom;
  };

  out.initial_psi = contrast(0.0) * scale;

  // Intercept-free logistic fluctuation with offset logit(mu); Newton on the
  // one-dimensional score sum H (ys - mu(eps)).
  double eps = 0.0;
  bool diverged = false;
  for (int iter = 0; iter < 100; ++iter) {
    double score = 0.0, info = 0.0;
    for (int i = 0; i < n; ++i) {
      const double base = z[i] == 1.0 ? m1[i] : m0[i];
      const double mu = expit(logit(base) + eps * h_obs[i]);
      score += h_obs[i] * (ys[i] - mu);
      info += h_obs[i] * h_obs[i] * mu * (1.0 - mu);
    }
    if (std::fabs(score) < 1e-10 * std::max(1.0, static_cast<double>(n))) break;
    if (info <= 1e-300) {
      diverged = true;
      break;
    }
    double step = score / info;
    step = std::min(2.0, std::max(-2.0, step));  // damp wild Newton steps
    eps += step;
    if (!std::isfinite(eps) || std::fabs(eps) > config.epsilon_cap) {
      diverged = true;
      break;
    }
  }
  if (diverged) {
    eps = 0.0;
    out.flags.push_back("NonfiniteFluctuation");
  }
  out.epsilon = eps;

  Eigen::VectorXd u1(n), u0(n);
  for (int i = 0; i < n; ++i) {
    u1[i] = expit(logit(m1[i]) + eps * h1[i]);
    u0[i] = expit(logit(m0[i]) + eps * h0[i]);
  }
  const double psi_scaled = contrast(eps);

  std::vector<double> ic(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double mu_obs = z[i] == 1.0 ? u1[i] : u0[i];
    const double residual_part = h_obs[i] * (ys[i] - mu_obs);
    if (estimand == Estimand::ATE) {
      ic[static_cast<std::size_t>(i)] = residual_part + (u1[i] - u0[i]) - psi_scaled;
    } else {
      ic[static_cast<std::size_t>(i)] =
          residual_part + (z[i] / pz) * ((u1[i] - u0[i]) - psi_scaled);
    }
  }

  out.psi = psi_scaled * scale;
  out.se = sample_sd(ic) / std::sqrt(static_cast<double>(n)) * scale;
  return out;
}

}  // namespace cbench
