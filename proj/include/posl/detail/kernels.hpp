#pragma once

// Numerical kernels behind the learner families. Exposed for unit tests.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "posl/learners.hpp"

namespace posl::detail {

using ConstMatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd beta;
  bool converged = true;
  int iterations = 0;
};

/// Weighted least squares with an unpenalized intercept; minimum-norm slopes
/// when the centred design is rank deficient.
LinearFit weighted_least_squares(const ConstMatrixRef& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& w);

/// argmin (1/2W) sum w (y - b0 - x b)^2 + (lambda/2) ||b||^2, W = sum w.
LinearFit ridge(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                double lambda);

/// argmin (1/2W) sum w (y - b0 - x b)^2 + lambda ||b||_1 by cyclic coordinate
/// descent. `objective_trace` receives the objective after every sweep.
LinearFit lasso(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                double lambda, int max_sweeps = 100000, double tol = 1e-10,
                std::vector<double>* objective_trace = nullptr);
double lasso_objective(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       double lambda, double intercept, const Eigen::VectorXd& beta);

enum class Penalty { none, ridge, lasso };

/// Penalized logistic regression by iteratively reweighted least squares
/// (coordinate descent inside each Newton step for the lasso penalty).
LinearFit logistic(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   Penalty penalty, double lambda, int max_iter = 100);

struct HingeOptions {
  int max_terms = 11;
  int min_span = 5;
  int max_knots = 20;
  double gcv_penalty = 2.0;
  double min_improvement = 1e-4;  // relative RSS drop needed to keep growing
};

struct HingeModel {
  std::vector<HingeTerm> basis;
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<HingeTerm> forward_basis;  // before pruning
  std::vector<double> gcv_by_size;       // GCV of the best subset with k terms, k = 0..
  bool converged = true;
};

std::vector<double> candidate_knots(std::span<const double> values, int min_span, int max_knots);
HingeModel hinge_spline(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const HingeOptions& options);
/// Evaluates the basis on x (n x terms, no intercept column).
Eigen::MatrixXd hinge_design(const ConstMatrixRef& x, const std::vector<HingeTerm>& basis);

struct TreeOptions {
  int max_depth = 3;  // < 0: unlimited
  int min_leaf = 5;
  int mtry = 0;       // features sampled per node; 0 = all
};

/// Rows sorted by each feature, computed once per design.
struct SortedColumns {
  std::vector<std::vector<int>> order;
  explicit SortedColumns(const ConstMatrixRef& x);
};

enum class LeafRule { mean, newton };

/// Greedy level-wise regression tree on response g with weights w (rows with
/// zero weight are ignored). Leaf values: weighted mean of g (mean) or
/// sum(w g) / sum(w h) (newton). `gain_by_feature` accumulates the weighted
/// squared-error reduction of every split.
RegressionTree build_tree(const ConstMatrixRef& x, const SortedColumns& sorted,
                          const Eigen::VectorXd& g, const Eigen::VectorXd& w,
                          const Eigen::VectorXd* hessian, LeafRule rule, const TreeOptions& options,
                          std::mt19937_64* rng, std::vector<double>* gain_by_feature);

struct BoostedModel {
  double base_score = 0.0;
  double shrinkage = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> training_loss;  // weighted loss after 0, 1, ..., rounds trees
};

BoostedModel gradient_boost(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            OutcomeMode mode, int rounds, double shrinkage, const TreeOptions& options);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace posl::detail
