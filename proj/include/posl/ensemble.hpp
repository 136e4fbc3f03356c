#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace posl {

/// Out-of-fold candidate predictions (rows = validated sessions, columns =
/// learners) with the observed outcomes and time weights.
struct MetaDataset {
  Eigen::MatrixXd predictions;
  std::vector<double> observed;
  std::vector<double> time_weights;
  std::vector<int> session_indices;
  std::vector<std::string> learner_ids;
  std::vector<int> dropped_folds;

  std::size_t rows() const { return observed.size(); }
  std::size_t learners() const { return static_cast<std::size_t>(predictions.cols()); }
  /// Throws ArgumentError on shape mismatch or non-finite entries.
  void validate() const;
};

struct AlphaWeights {
  std::vector<double> alpha;
  bool convexified = false;
};

enum class MetaKind { dsl, esl_convex, esl_nonconvex };
enum class LossKind { squared, negative_log_likelihood };
const char* to_string(MetaKind k);
const char* to_string(LossKind k);

struct SlConfig {
  MetaKind meta_kind = MetaKind::esl_nonconvex;
  LossKind loss_kind = LossKind::squared;
  double delta = 0.1;
  int recency_window = 5;
  double lo = 0.0;
  double hi = 50.0;

  void validate() const;
};

/// omega_t = 1 if t >= tau - recency_window, else (1 - delta)^(tau - t).
std::vector<double> time_weights(int tau, std::span<const int> sessions, double delta = 0.1,
                                 int recency_window = 5);

/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
inline constexpr double kProbabilityClamp = 1e-12;

double cumulative_weighted_loss(std::span<const double> observed, std::span<const double> predicted,
                                std::span<const double> omega, LossKind kind);

struct NnlsSolution {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = true;
};

/// Lawson-Hanson active set: argmin ||a x - b||^2 subject to x >= 0.
NnlsSolution nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

/// argmin over alpha >= 0 of sum omega_r (y_r - yhat_r . alpha)^2, no
/// intercept. convexify divides the minimiser by its sum (uniform if 0).
AlphaWeights solve_nnls(const MetaDataset& meta, bool convexify);
/// alpha / sum(alpha), or uniform when the sum is 0.
AlphaWeights convexify(const AlphaWeights& alpha);

/// Column with the smallest weighted loss; ties go to the lowest index.
int dsl_select(const MetaDataset& meta, LossKind kind);

struct Combination {
  double value = 0.0;  // within [lo, hi]
  double raw = 0.0;    // before clamping
  bool truncated = false;
};

Combination combine_and_truncate(std::span<const double> predictions, const AlphaWeights& alpha, double lo,
                                 double hi);
Combination combine_and_truncate(std::span<const double> predictions, int choice, double lo, double hi);
Combination truncate(double raw, double lo, double hi);

}  // namespace posl
