#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cbench/rng.hpp"

namespace cbench {

struct TreeConfig {
  int max_depth = 30;
  int min_leaf = 5;
  int mtry = 0;  // 0 = all features
};

// CART regression tree: greedy binary splits minimizing squared error, leaf
// value = mean, split point = midpoint of the gap between neighbors.
class RegressionTree {
 public:
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeConfig& config,
           Rng* rng = nullptr, const std::vector<int>* rows = nullptr);
  double predict_row(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  int build(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<int>& idx, int begin,
            int end, int depth, const TreeConfig& config, Rng* rng);
  std::vector<Node> nodes_;
};

struct ForestConfig {
  int n_trees = 200;
  int mtry = 0;                  // 0 = ceil(p/3)
  double sample_fraction = 0.8;  // bootstrap draw size; >= 1 disables resampling
  int max_depth = 30;
  int min_leaf = 5;
  std::uint64_t seed = 0;
};

// Averaged CART trees on seeded bootstrap samples with per-split feature
// subsampling. Per-tree streams are derived from the seed, so results do not
// depend on scheduling and reruns are bit-identical.
class RandomForest {
 public:
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config);
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

 private:
  std::vector<RegressionTree> trees_;
};

struct BoostConfig {
  int n_rounds = 200;
  double learning_rate = 0.05;
  int max_depth = 2;
  int min_leaf = 5;
};

// Stagewise squared-error gradient boosting with shrinkage:
// prediction = base mean + sum_m eta * tree_m.
class GradientBoosting {
 public:
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BoostConfig& config);
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  const std::vector<double>& training_loss() const { return training_loss_; }

 private:
  double base_ = 0.0;
  double learning_rate_ = 0.0;
  std::vector<RegressionTree> trees_;
  std::vector<double> training_loss_;
};

struct LassoFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // original scale
  double lambda = 0.0;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Cyclic coordinate descent with soft thresholding on internally standardized
// columns, objective (1/2n)||y - Xb||^2 + lambda * sum|b_j|; converged when
// the max coefficient change per sweep is below 1e-7.
LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

// Largest lambda with any nonzero slope, max_j |x_j' (y - ybar)| / n on
// standardized columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Grid cross-validation for lambda (log-spaced from lambda_max down).
double lasso_cv_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int grid_size,
                       int folds, std::uint64_t seed);

enum class LearnerKind { forest, lasso, boosting };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& s);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::forest;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;
};

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
};

// Validates hyperparameters against their documented ranges and fits.
std::unique_ptr<FittedLearner> fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& y);

// Seeded fold assignment: a shuffle within each stratum (or globally when
// stratify is null), dealt round-robin into k folds.
std::vector<int> make_folds(int n, int k, std::uint64_t seed, const std::vector<int>* stratify);

// Column j holds learner j's out-of-fold predictions.
Eigen::MatrixXd cv_predictions(const std::vector<LearnerSpec>& learners, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, int k, std::uint64_t seed,
                               const std::vector<int>* stratify = nullptr);

}  // namespace cbench
