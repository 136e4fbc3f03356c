#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "posl/execution.hpp"
#include "posl/paneldata.hpp"

namespace posl {

enum class Family { mean, linear, ridge, lasso, hinge_spline, gbt };
enum class Scope { individual, historical };
enum class CvScheme { rocv, rwcv };

const char* to_string(Family f);
const char* to_string(Scope s);
const char* to_string(CvScheme s);
Family parse_family(const std::string& s);
CvScheme parse_cv_scheme(const std::string& s);

using Hyperparameters = std::map<std::string, double>;

/// Recognised keys and their defaults:
///   ridge           lambda 1.0, max_iter 100 (binary mode)
///   lasso           lambda 0.1, max_iter 10000 sweeps, tol 1e-10
///   hinge_spline    max_terms 11 (including the intercept), min_span 5,
///                   max_knots 20, gcv_penalty 2
///   gbt             rounds 50, max_depth 3, shrinkage 0.1, min_leaf 5
///   screening       screen_k 5, rf_trees 200, rf_min_leaf 5, rf_mtry 0 (p/3),
///                   rf_permutation 0, seed 1
Hyperparameters default_hyperparameters(Family f);

struct LearnerSpec {
  Family family = Family::mean;
  Hyperparameters hyper;
  bool screened = false;
  Scope scope = Scope::individual;
  CvScheme cv_scheme = CvScheme::rocv;
  OutcomeMode outcome_mode = OutcomeMode::continuous;

  /// hyper[key] if set, else the family default; throws for unknown keys.
  double param(const std::string& key) const;
  int int_param(const std::string& key) const;
  /// e.g. "ind_ridge_rf_rocv", "hist_gbt".
  std::string id() const;
  void validate() const;
};

struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  template <class Row>
  double predict(const Row& x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(k)];
      k = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }
};

/// max(0, x - knot) for direction +1, max(0, knot - x) for -1.
struct HingeTerm {
  int variable = 0;
  double knot = 0.0;
  int direction = 1;

  double eval(double x) const {
    const double d = direction > 0 ? x - knot : knot - x;
    return d > 0.0 ? d : 0.0;
  }
};

struct FittedLearner {
  LearnerSpec spec;
  int n_features = 0;  // training arity before screening
  std::vector<int> selected_features;
  double intercept = 0.0;
  std::vector<double> coefficients;  // linear families: per feature; hinge: per basis term
  std::vector<HingeTerm> basis;
  std::vector<RegressionTree> trees;
  double shrinkage = 1.0;
  bool converged = true;
};

struct ScreeningReport {
  std::vector<double> importances;
  std::vector<int> selected;  // k largest importances, ties to the lower index
};

struct ForestOptions {
  int min_leaf = 5;
  int mtry = 0;  // 0 selects max(1, p / 3)
  bool permutation_importance = false;
  Execution execution = Execution::parallel;
};

ScreeningReport rf_importance_screen(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     std::span<const double> y, int k, int n_trees,
                                     std::uint64_t seed, const ForestOptions& options = {});

/// The screening a screened spec runs before its fit.
ScreeningReport screen_for(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           std::span<const double> y);

/// Fits `spec`. Unit weights when `w` is empty. A precomputed `screening`
/// replaces the internal one for screened specs (it must come from screen_for
/// on the same data). Convergence failures are reported in-band.
FittedLearner fit(const LearnerSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                  std::span<const double> y, std::span<const double> w = {},
                  const ScreeningReport* screening = nullptr);
FittedLearner fit(const LearnerSpec& spec, const std::vector<FeatureRow>& rows,
                  std::span<const double> y, std::span<const double> w = {});

Eigen::VectorXd predict(const FittedLearner& fitted, const Eigen::Ref<const Eigen::MatrixXd>& x);
std::vector<double> predict(const FittedLearner& fitted, const std::vector<FeatureRow>& rows);

nlohmann::json to_json(const LearnerSpec& spec);
LearnerSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FittedLearner& fitted);
FittedLearner learner_from_json(const nlohmann::json& j);

/// S(z, gamma) = sign(z) * max(|z| - gamma, 0).
inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace posl
