#include "cbench/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbench/error.hpp"

namespace cbench {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

}  // namespace

int RegressionTree::build(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          std::vector<int>& idx, int begin, int end, int depth,
                          const TreeConfig& config, Rng* rng) {
  const int m = end - begin;
  double sum = 0.0, sum2 = 0.0;
  for (int i = begin; i < end; ++i) {
    const double v = y[idx[static_cast<std::size_t>(i)]];
    sum += v;
    sum2 += v * v;
  }
  const double node_value = sum / m;
  const double node_sse = sum2 - sum * sum / m;

  Node node;
  node.value = node_value;
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);

  if (depth >= config.max_depth || m < 2 * config.min_leaf || node_sse <= 1e-12) return self;

  const int p = static_cast<int>(X.cols());
  std::vector<int> features(static_cast<std::size_t>(p));
  std::iota(features.begin(), features.end(), 0);
  int n_candidates = p;
  if (config.mtry > 0 && config.mtry < p) {
    require(rng != nullptr, "DomainError", "mtry subsampling needs an Rng");
    // Partial Fisher-Yates; candidates keep ascending order for determinism.
    for (int i = 0; i < config.mtry; ++i) {
      const int j = i + static_cast<int>(rng->uniform_int(static_cast<std::uint64_t>(p - i)));
      std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
    }
    n_candidates = config.mtry;
    std::sort(features.begin(), features.begin() + n_candidates);
  }

  SplitChoice best;
  std::vector<std::pair<double, double>> vals(static_cast<std::size_t>(m));  // (x, y)
  for (int f = 0; f < n_candidates; ++f) {
    const int feature = features[static_cast<std::size_t>(f)];
    for (int i = 0; i < m; ++i) {
      const int row = idx[static_cast<std::size_t>(begin + i)];
      vals[static_cast<std::size_t>(i)] = {X(row, feature), y[row]};
    }
    std::sort(vals.begin(), vals.end());
    double left_sum = 0.0;
    for (int i = 0; i < m - 1; ++i) {
      left_sum += vals[static_cast<std::size_t>(i)].second;
      const int left_n = i + 1;
      if (left_n < config.min_leaf || m - left_n < config.min_leaf) continue;
      if (vals[static_cast<std::size_t>(i)].first == vals[static_cast<std::size_t>(i + 1)].first) {
        continue;  // cannot split inside a tie block
      }
      const double right_sum = sum - left_sum;
      const double gain = left_sum * left_sum / left_n + right_sum * right_sum / (m - left_n) -
                          sum * sum / m;
      if (gain > best.gain + 1e-12) {
        best.gain = gain;
        best.feature = feature;
        best.threshold = 0.5 * (vals[static_cast<std::size_t>(i)].first +
                                vals[static_cast<std::size_t>(i + 1)].first);
      }
    }
  }
  if (best.feature < 0) return self;

  const auto mid = std::stable_partition(
      idx.begin() + begin, idx.begin() + end,
      [&](int row) { return X(row, best.feature) <= best.threshold; });
  const int split = static_cast<int>(mid - idx.begin());
  if (split == begin || split == end) return self;  // numeric edge, keep as leaf

  nodes_[static_cast<std::size_t>(self)].feature = best.feature;
  nodes_[static_cast<std::size_t>(self)].threshold = best.threshold;
  const int left = build(X, y, idx, begin, split, depth + 1, config, rng);
  nodes_[static_cast<std::size_t>(self)].left = left;
  const int right = build(X, y, idx, split, end, depth + 1, config, rng);
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

void RegressionTree::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const TreeConfig& config, Rng* rng, const std::vector<int>* rows) {
  require(X.rows() == y.size(), "DomainError", "tree: X/y length mismatch");
  require(config.min_leaf >= 1, "DomainError", "min_leaf must be >= 1");
  nodes_.clear();
  std::vector<int> idx;
  if (rows) {
    idx = *rows;
  } else {
    idx.resize(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
  }
  require(!idx.empty(), "DomainError", "tree: empty sample");
  build(X, y, idx, 0, static_cast<int>(idx.size()), 0, config, rng);
}

double RegressionTree::predict_row(const Eigen::RowVectorXd& x) const {
  int node = 0;
  while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(node)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (int i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
  return out;
}

void RandomForest::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const ForestConfig& config) {
  require(config.n_trees >= 1, "DomainError", "n_trees must be >= 1");
  require(config.sample_fraction > 0.0, "DomainError", "sample_fraction must be > 0");
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const int mtry = config.mtry > 0 ? config.mtry
                                   : static_cast<int>(std::ceil(static_cast<double>(p) / 3.0));

  TreeConfig tree_config;
  tree_config.max_depth = config.max_depth;
  tree_config.min_leaf = config.min_leaf;
  tree_config.mtry = std::min(mtry, p);

  trees_.assign(static_cast<std::size_t>(config.n_trees), RegressionTree());
  const Rng master(config.seed);
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng = master.derive(static_cast<std::uint64_t>(t));
    std::vector<int> rows;
    if (config.sample_fraction >= 1.0) {
      rows.resize(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
    } else {
      const int m = std::max(1, static_cast<int>(std::lround(config.sample_fraction * n)));
      rows.resize(static_cast<std::size_t>(m));
      for (auto& r : rows) r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    trees_[static_cast<std::size_t>(t)].fit(X, y, tree_config, &rng, &rows);
  }
}

Eigen::VectorXd RandomForest::predict(const Eigen::MatrixXd& X) const {
  require(!trees_.empty(), "DomainError", "forest not fitted");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const auto& tree : trees_) out += tree.predict(X);
  return out / static_cast<double>(trees_.size());
}

void GradientBoosting::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const BoostConfig& config) {
  require(config.n_rounds >= 1, "DomainError", "n_rounds must be >= 1");
  require(config.learning_rate > 0.0 && config.learning_rate <= 1.0, "DomainError",
          "learning_rate must be in (0,1]");
  base_ = y.mean();
  learning_rate_ = config.learning_rate;
  trees_.clear();
  training_loss_.clear();

  TreeConfig tree_config;
  tree_config.max_depth = config.max_depth;
  tree_config.min_leaf = config.min_leaf;

  Eigen::VectorXd residual = y.array() - base_;
  const int n = static_cast<int>(y.size());
  for (int round = 0; round < config.n_rounds; ++round) {
    RegressionTree tree;
    tree.fit(X, residual, tree_config);
    const Eigen::VectorXd pred = tree.predict(X);
    residual -= learning_rate_ * pred;
    trees_.push_back(std::move(tree));
    training_loss_.push_back(residual.squaredNorm() / n);
  }
}

Eigen::VectorXd GradientBoosting::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), base_);
  for (const auto& tree : trees_) out += learning_rate_ * tree.predict(X);
  return out;
}

Eigen::VectorXd LassoFit::predict(const Eigen::MatrixXd& X) const {
  require(X.cols() == coefficients.size(), "ArityMismatch", "lasso predict arity mismatch");
  return (X * coefficients).array() + intercept;
}

namespace {

struct Standardized {
  Eigen::MatrixXd X;        // centered, unit population sd (constant cols zeroed)
  Eigen::VectorXd mean, sd;  // sd = 0 marks a constant column
  Eigen::VectorXd y_centered;
  double y_mean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Standardized s;
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  s.X.resize(n, p);
  s.mean.resize(p);
  s.sd.resize(p);
  for (int j = 0; j < p; ++j) {
    s.mean[j] = X.col(j).mean();
    const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
    s.sd[j] = std::sqrt(var);
    if (s.sd[j] > 0.0) {
      s.X.col(j) = (X.col(j).array() - s.mean[j]) / s.sd[j];
    } else {
      s.X.col(j).setZero();
    }
  }
  s.y_mean = y.mean();
  s.y_centered = y.array() - s.y_mean;
  return s;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Standardized s = standardize(X, y);
  const int n = static_cast<int>(X.rows());
  return (s.X.transpose() * s.y_centered).cwiseAbs().maxCoeff() / n;
}

LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  require(lambda >= 0.0, "DomainError", "lambda must be >= 0");
  require(X.rows() == y.size() && X.rows() >= 2, "DomainError", "lasso: bad input shape");
  const Standardized s = standardize(X, y);
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = s.y_centered;
  constexpr double kTol = 1e-7;
  constexpr int kMaxSweeps = 100000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < p; ++j) {
      if (s.sd[j] == 0.0) continue;
      const double old = beta[j];
      // With unit-sd columns, x_j'x_j = n, so the update is a soft threshold.
      const double rho = s.X.col(j).dot(residual) / n + old;
      const double updated = std::copysign(std::max(0.0, std::fabs(rho) - lambda), rho);
      if (updated != old) {
        residual -= (updated - old) * s.X.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::fabs(updated - old));
      }
    }
    if (max_change < kTol) break;
  }

  LassoFit fit;
  fit.lambda = lambda;
  fit.coefficients.resize(p);
  double adjust = 0.0;
  for (int j = 0; j < p; ++j) {
    fit.coefficients[j] = s.sd[j] > 0.0 ? beta[j] / s.sd[j] : 0.0;
    adjust += fit.coefficients[j] * s.mean[j];
  }
  fit.intercept = s.y_mean - adjust;
  return fit;
}

double lasso_cv_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int grid_size,
                       int folds, std::uint64_t seed) {
  require(grid_size >= 1 && folds >= 2, "DomainError", "lasso_cv_lambda: bad grid/folds");
  const double lam_max = std::max(lasso_lambda_max(X, y), 1e-12);
  std::vector<double> grid;
  for (int g = 0; g < grid_size; ++g) {
    const double f = grid_size == 1 ? 0.0
                                    : static_cast<double>(g) / static_cast<double>(grid_size - 1);
    grid.push_back(lam_max * std::pow(1e-3, f));
  }
  const std::vector<int> fold_of = make_folds(static_cast<int>(X.rows()), folds, seed, nullptr);

  double best_lambda = grid.front();
  double best_risk = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double risk = 0.0;
    int count = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train, test;
      for (int i = 0; i < static_cast<int>(fold_of.size()); ++i) {
        (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      }
      if (train.size() < 2 || test.empty()) continue;
      Eigen::MatrixXd xt(static_cast<int>(train.size()), X.cols());
      Eigen::VectorXd yt(static_cast<int>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        xt.row(static_cast<int>(i)) = X.row(train[i]);
        yt[static_cast<int>(i)] = y[train[i]];
      }
      const LassoFit fit = fit_lasso(xt, yt, lambda);
      for (int i : test) {
        const double pred = fit.predict(X.row(i))[0];
        risk += (y[i] - pred) * (y[i] - pred);
        ++count;
      }
    }
    if (count == 0) continue;
    risk /= count;
    if (risk < best_risk - 1e-15) {
      best_risk = risk;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::forest: return "forest";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::boosting: return "boost";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  if (s == "forest" || s == "rf") return LearnerKind::forest;
  if (s == "lasso") return LearnerKind::lasso;
  if (s == "boost" || s == "boosting" || s == "gbm") return LearnerKind::boosting;
  fail("DomainError", "unknown learner '" + s + "'");
}

namespace {

double hyper(const LearnerSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.hyperparameters.find(key);
  return it == spec.hyperparameters.end() ? fallback : it->second;
}

class ForestLearner final : public FittedLearner {
 public:
  ForestLearner(const LearnerSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    ForestConfig config;
    config.n_trees = static_cast<int>(hyper(spec, "n_trees", 200));
    config.mtry = static_cast<int>(hyper(spec, "mtry", 0));
    config.sample_fraction = hyper(spec, "sample_fraction", 0.8);
    config.max_depth = static_cast<int>(hyper(spec, "max_depth", 30));
    config.min_leaf = static_cast<int>(hyper(spec, "min_leaf", 5));
    config.seed = spec.seed;
    require(config.n_trees >= 1, "DomainError", "forest: n_trees must be >= 1");
    model_.fit(X, y, config);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return model_.predict(X); }

 private:
  RandomForest model_;
};

class BoostLearner final : public FittedLearner {
 public:
  BoostLearner(const LearnerSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    BoostConfig config;
    config.n_rounds = static_cast<int>(hyper(spec, "n_rounds", 200));
    config.learning_rate = hyper(spec, "learning_rate", 0.05);
    config.max_depth = static_cast<int>(hyper(spec, "max_depth", 2));
    config.min_leaf = static_cast<int>(hyper(spec, "min_leaf", 5));
    model_.fit(X, y, config);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return model_.predict(X); }

 private:
  GradientBoosting model_;
};

class LassoLearner final : public FittedLearner {
 public:
  LassoLearner(const LearnerSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    double lambda = hyper(spec, "lambda", -1.0);
    if (lambda < 0.0) {
      const int grid = static_cast<int>(hyper(spec, "lambda_grid", 20));
      const int folds = static_cast<int>(hyper(spec, "lambda_folds", 10));
      lambda = lasso_cv_lambda(X, y, grid, folds, spec.seed);
    }
    fit_ = fit_lasso(X, y, lambda);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(X); }

 private:
  LassoFit fit_;
};

}  // namespace

std::unique_ptr<FittedLearner> fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& y) {
  switch (spec.kind) {
    case LearnerKind::forest: return std::make_unique<ForestLearner>(spec, X, y);
    case LearnerKind::boosting: return std::make_unique<BoostLearner>(spec, X, y);
    case LearnerKind::lasso: return std::make_unique<LassoLearner>(spec, X, y);
  }
  fail("DomainError", "unknown learner kind");
}

std::vector<int> make_folds(int n, int k, std::uint64_t seed, const std::vector<int>* stratify) {
  require(k >= 2, "DomainError", "folds must be >= 2");
  require(k <= n, "DomainError", "more folds than observations");
  std::vector<int> fold_of(static_cast<std::size_t>(n), -1);
  Rng rng(Rng::mix(seed, 0xF01D5));
  if (stratify) {
    require(static_cast<int>(stratify->size()) == n, "DomainError", "stratify length mismatch");
    std::vector<int> strata(stratify->begin(), stratify->end());
    std::vector<int> unique = strata;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    int cursor = 0;  // continue the deal across strata so folds stay balanced
    for (int s : unique) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i) {
        if (strata[static_cast<std::size_t>(i)] == s) members.push_back(i);
      }
      rng.shuffle(members);
      for (int i : members) fold_of[static_cast<std::size_t>(i)] = (cursor++) % k;
    }
  } else {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % k;
  }
  return fold_of;
}

Eigen::MatrixXd cv_predictions(const std::vector<LearnerSpec>& learners, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, int k, std::uint64_t seed,
                               const std::vector<int>* stratify) {
  require(!learners.empty(), "DomainError", "cv_predictions needs >= 1 learner");
  const int n = static_cast<int>(X.rows());
  const std::vector<int> fold_of = make_folds(n, k, seed, stratify);

  Eigen::MatrixXd out(n, static_cast<int>(learners.size()));
  for (int f = 0; f < k; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    }
    if (test.empty()) continue;
    require(train.size() >= 2, "TooFewUnits", "cv fold leaves too few training rows");
    Eigen::MatrixXd xt(static_cast<int>(train.size()), X.cols());
    Eigen::VectorXd yt(static_cast<int>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      xt.row(static_cast<int>(i)) = X.row(train[i]);
      yt[static_cast<int>(i)] = y[train[i]];
    }
    Eigen::MatrixXd xtest(static_cast<int>(test.size()), X.cols());
    for (std::size_t i = 0; i < test.size(); ++i) xtest.row(static_cast<int>(i)) = X.row(test[i]);

    for (std::size_t j = 0; j < learners.size(); ++j) {
      LearnerSpec spec = learners[j];
      // Per-(learner, fold) stream so fold parallelism cannot reorder draws.
      spec.seed = Rng::mix(spec.seed != 0 ? spec.seed : seed, 1000003ULL * (j + 1) + static_cast<std::uint64_t>(f));
      const auto fit = fit_learner(spec, xt, yt);
      const Eigen::VectorXd pred = fit->predict(xtest);
      for (std::size_t i = 0; i < test.size(); ++i) {
        out(test[i], static_cast<int>(j)) = pred[static_cast<int>(i)];
      }
    }
  }
  return out;
}

}  // namespace cbench
