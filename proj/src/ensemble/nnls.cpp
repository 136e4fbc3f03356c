#include <cmath>
#include <limits>
#include <vector>

#include "posl/ensemble.hpp"
#include "posl/error.hpp"

namespace posl {

namespace {

/// Least squares on the passive columns, refined once against the residual.
Eigen::VectorXd passive_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              const std::vector<Eigen::Index>& passive) {
  Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t k = 0; k < passive.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(passive[k]);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ap);
  Eigen::VectorXd z = cod.solve(b);
  z += cod.solve(b - ap * z);
  return z;
}

}  // namespace

NnlsSolution nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  const Eigen::Index m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw ArgumentError("nnls: empty problem");
  if (b.size() != m) throw ArgumentError("nnls: dimension mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);

  NnlsSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  std::vector<char> in_passive(static_cast<std::size_t>(n), 0);
  const double tol = 1e-14 * std::max(1.0, a.norm() * b.norm());

  Eigen::VectorXd w = a.transpose() * b;
  for (int iter = 0;; ++iter) {
    Eigen::Index j_max = -1;
    double w_max = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!in_passive[static_cast<std::size_t>(j)] && w(j) > w_max) {
        w_max = w(j);
        j_max = j;
      }
    if (j_max < 0) break;
    if (iter >= max_iterations) {
      sol.converged = false;
      break;
    }
    sol.iterations = iter + 1;
    in_passive[static_cast<std::size_t>(j_max)] = 1;

    for (Eigen::Index inner = 0; inner <= n; ++inner) {
      std::vector<Eigen::Index> passive;
      for (Eigen::Index j = 0; j < n; ++j)
        if (in_passive[static_cast<std::size_t>(j)]) passive.push_back(j);
      const Eigen::VectorXd z = passive_solve(a, b, passive);
      bool feasible = true;
      for (Eigen::Index k = 0; k < z.size(); ++k) feasible = feasible && z(k) > 0.0;
      if (feasible) {
        sol.x.setZero();
        for (std::size_t k = 0; k < passive.size(); ++k) sol.x(passive[k]) = z(static_cast<Eigen::Index>(k));
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double step = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) {
          const double xk = sol.x(passive[k]);
          step = std::min(step, xk / (xk - zk));
        }
      }
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const Eigen::Index j = passive[k];
        sol.x(j) += step * (z(static_cast<Eigen::Index>(k)) - sol.x(j));
        if (sol.x(j) <= 1e-15 * std::max(1.0, sol.x.cwiseAbs().maxCoeff())) {
          sol.x(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = 0;
        }
      }
    }
    w = a.transpose() * (b - a * sol.x);
  }
  return sol;
}

AlphaWeights solve_nnls(const MetaDataset& meta, bool convexify) {
  meta.validate();
  if (meta.rows() == 0) throw ArgumentError("nnls: empty meta dataset");
  const auto r = static_cast<Eigen::Index>(meta.rows());
  Eigen::VectorXd sw(r), y(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    sw(i) = std::sqrt(meta.time_weights[static_cast<std::size_t>(i)]);
    y(i) = meta.observed[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd a = sw.asDiagonal() * meta.predictions;
  const auto sol = nnls(a, sw.cwiseProduct(y));

  AlphaWeights out;
  out.alpha.assign(sol.x.data(), sol.x.data() + sol.x.size());
  return convexify ? posl::convexify(out) : out;
}

AlphaWeights convexify(const AlphaWeights& alpha) {
  AlphaWeights out = alpha;
  out.convexified = true;
  double sum = 0.0;
  for (double v : out.alpha) sum += v;
  for (double& v : out.alpha) v = sum > 0.0 ? v / sum : 1.0 / static_cast<double>(out.alpha.size());
  return out;
}

}  // namespace posl
