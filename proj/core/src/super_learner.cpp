#include "cbench/super_learner.hpp"

#include <cmath>

#include "cbench/error.hpp"
#include "cbench/rng.hpp"

namespace cbench {

SuperLearnerFit super_learner_weights(const Eigen::MatrixXd& P, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(P.rows());
  const int k = static_cast<int>(P.cols());
  require(n == y.size() && n > 0 && k > 0, "DomainError", "super_learner_weights: bad shapes");
  require(P.allFinite(), "DomainError", "out-of-fold predictions must be finite");

  SuperLearnerFit fit;
  fit.cv_risk.resize(k);
  for (int j = 0; j < k; ++j) fit.cv_risk[j] = (y - P.col(j)).squaredNorm() / n;

  // Work with the k x k Gram form: obj(w) = (w'Gw - 2 b'w + y'y)/n.
  const Eigen::MatrixXd G = P.transpose() * P;
  const Eigen::VectorXd b = P.transpose() * y;
  const double yy = y.squaredNorm();
  auto objective = [&](const Eigen::VectorXd& w) {
    return (w.dot(G * w) - 2.0 * b.dot(w) + yy) / n;
  };
  auto gradient = [&](const Eigen::VectorXd& w) {
    return Eigen::VectorXd(2.0 * (G * w - b) / n);
  };

  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / k);
  double obj = objective(w);
  double step = 1.0 / std::max(1e-12, 2.0 * G.diagonal().maxCoeff() / n);
  constexpr int kMaxIter = 200000;
  constexpr double kTol = 1e-8;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Eigen::VectorXd g = gradient(w);
    // Exponentiated-gradient update with backtracking on the objective.
    Eigen::VectorXd candidate;
    double cand_obj = 0.0;
    double eta = step;
    bool accepted = false;
    for (int back = 0; back < 60; ++back) {
      const Eigen::ArrayXd scaled = -eta * (g.array() - g.maxCoeff());
      candidate = (w.array() * scaled.exp()).matrix();
      const double total = candidate.sum();
      require(total > 0.0, "DomainError", "exponentiated gradient collapsed");
      candidate /= total;
      cand_obj = objective(candidate);
      if (cand_obj <= obj + 1e-18) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
    const double change = (candidate - w).cwiseAbs().maxCoeff();
    w = candidate;
    obj = cand_obj;
    step = std::min(eta * 2.0, 1e8);  // let the step grow back
    if (change < kTol) break;
  }

  // Snap negligible mass to zero and renormalize.
  for (int j = 0; j < k; ++j) {
    if (w[j] < 1e-12) w[j] = 0.0;
  }
  const double total = w.sum();
  require(total > 0.0, "DomainError", "stacking weights vanished");
  w /= total;

  fit.weights = w;
  fit.objective = objective(w);
  return fit;
}

void SuperLearner::fit(const std::vector<LearnerSpec>& learners, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, int folds, std::uint64_t seed,
                       const std::vector<int>* stratify) {
  require(!learners.empty(), "DomainError", "SuperLearner needs >= 1 learner");
  const Eigen::MatrixXd oof = cv_predictions(learners, X, y, folds, seed, stratify);
  info_ = super_learner_weights(oof, y);
  info_.folds = folds;

  full_fits_.clear();
  for (std::size_t j = 0; j < learners.size(); ++j) {
    LearnerSpec spec = learners[j];
    spec.seed = Rng::mix(spec.seed != 0 ? spec.seed : seed, 900001ULL * (j + 1));
    full_fits_.push_back(fit_learner(spec, X, y));
  }
}

Eigen::VectorXd SuperLearner::predict(const Eigen::MatrixXd& X) const {
  require(!full_fits_.empty(), "DomainError", "SuperLearner not fitted");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t j = 0; j < full_fits_.size(); ++j) {
    if (info_.weights[static_cast<int>(j)] == 0.0) continue;
    out += info_.weights[static_cast<int>(j)] * full_fits_[j]->predict(X);
  }
  return out;
}

}  // namespace cbench
