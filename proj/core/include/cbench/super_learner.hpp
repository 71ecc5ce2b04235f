#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "cbench/learners.hpp"

namespace cbench {

struct SuperLearnerFit {
  Eigen::VectorXd weights;  // on the simplex
  Eigen::VectorXd cv_risk;  // per-learner out-of-fold mean squared error
  int folds = 0;
  double objective = 0.0;  // ||y - P w||^2 / n at the chosen weights
};

// Simplex-constrained stacking weights, min_w ||y - P w||^2 solved by
// exponentiated-gradient descent to a 1e-8 stationarity tolerance.
SuperLearnerFit super_learner_weights(const Eigen::MatrixXd& oof_predictions,
                                      const Eigen::VectorXd& y);

// Cross-validated stacking: CV weights, then each learner refit on the full
// data; predictions are the weight-combined full-data fits.
class SuperLearner {
 public:
  void fit(const std::vector<LearnerSpec>& learners, const Eigen::MatrixXd& X,
           const Eigen::VectorXd& y, int folds, std::uint64_t seed,
           const std::vector<int>* stratify = nullptr);
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  const SuperLearnerFit& fit_info() const { return info_; }

 private:
  SuperLearnerFit info_;
  std::vector<std::unique_ptr<FittedLearner>> full_fits_;
};

}  // namespace cbench
