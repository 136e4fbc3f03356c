#include <algorithm>
#include <cmath>

#include "posl/detail/kernels.hpp"
#include "posl/error.hpp"

namespace posl::detail {

namespace {

struct Centered {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
  double w_sum = 0.0;
};

Centered center(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  Centered c;
  c.w_sum = w.sum();
  if (!(c.w_sum > 0.0)) throw ArgumentError("weights sum to zero");
  c.x_mean = (w.transpose() * x) / c.w_sum;
  c.y_mean = w.dot(y) / c.w_sum;
  c.x = x.rowwise() - c.x_mean;
  c.y = y.array() - c.y_mean;
  return c;
}

bool all_finite(const LinearFit& f) { return std::isfinite(f.intercept) && f.beta.allFinite(); }

double log_likelihood_term(double y, double eta) {
  // y * eta - log(1 + exp(eta)), evaluated without overflow
  const double softplus = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
  return y * eta - softplus;
}

}  // namespace

LinearFit weighted_least_squares(const ConstMatrixRef& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& w) {
  auto c = center(x, y, w);
  LinearFit fit;
  fit.beta = Eigen::VectorXd::Zero(x.cols());
  if (x.cols() > 0) {
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd a = sw.asDiagonal() * c.x;
    const Eigen::VectorXd b = sw.asDiagonal() * c.y;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    fit.beta = cod.solve(b);
  }
  fit.intercept = c.y_mean - c.x_mean.dot(fit.beta);
  fit.converged = all_finite(fit);
  return fit;
}

LinearFit ridge(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                double lambda) {
  if (lambda < 0.0) throw ArgumentError("ridge penalty must be >= 0");
  if (lambda == 0.0) return weighted_least_squares(x, y, w);
  auto c = center(x, y, w);
  const Eigen::MatrixXd xw = c.x.transpose() * w.asDiagonal();
  Eigen::MatrixXd gram = (xw * c.x) / c.w_sum;
  gram.diagonal().array() += lambda;
  LinearFit fit;
  fit.beta = gram.ldlt().solve((xw * c.y) / c.w_sum);
  fit.intercept = c.y_mean - c.x_mean.dot(fit.beta);
  fit.converged = all_finite(fit);
  return fit;
}

double lasso_objective(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       double lambda, double intercept, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd r = (y - x * beta).array() - intercept;
  return 0.5 * w.dot(r.cwiseProduct(r)) / w.sum() + lambda * beta.lpNorm<1>();
}

LinearFit lasso(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                double lambda, int max_sweeps, double tol, std::vector<double>* objective_trace) {
  if (lambda < 0.0) throw ArgumentError("lasso penalty must be >= 0");
  auto c = center(x, y, w);
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd wn = w / c.w_sum;
  Eigen::VectorXd a(p);
  for (Eigen::Index j = 0; j < p; ++j) a(j) = wn.dot(c.x.col(j).cwiseAbs2());
  const double a_floor = 1e-24 * (1.0 + (p ? a.maxCoeff() : 0.0));
  const double scale = std::max(wn.dot(c.y.cwiseAbs2()), 1e-300);

  LinearFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  fit.converged = false;
  Eigen::VectorXd r = c.y;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (a(j) <= a_floor) continue;
      const double z = wn.dot(c.x.col(j).cwiseProduct(r)) + a(j) * fit.beta(j);
      const double next = soft_threshold(z, lambda) / a(j);
      const double d = next - fit.beta(j);
      if (d != 0.0) {
        r -= d * c.x.col(j);
        fit.beta(j) = next;
        max_change = std::max(max_change, a(j) * d * d);
      }
    }
    fit.iterations = sweep;
    if (objective_trace) {
      objective_trace->push_back(
          lasso_objective(x, y, w, lambda, c.y_mean - c.x_mean.dot(fit.beta), fit.beta));
    }
    if (!std::isfinite(max_change)) break;
    if (max_change <= tol * scale) {
      fit.converged = true;
      break;
    }
  }
  fit.intercept = c.y_mean - c.x_mean.dot(fit.beta);
  fit.converged = fit.converged && all_finite(fit);
  return fit;
}

LinearFit logistic(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   Penalty penalty, double lambda, int max_iter) {
  const double w_sum = w.sum();
  if (!(w_sum > 0.0)) throw ArgumentError("weights sum to zero");
  const Eigen::Index n = x.rows(), p = x.cols();
  const double prevalence = std::clamp(w.dot(y) / w_sum, 1e-6, 1.0 - 1e-6);

  LinearFit fit;
  fit.intercept = std::log(prevalence / (1.0 - prevalence));
  fit.beta = Eigen::VectorXd::Zero(p);
  fit.converged = false;

  auto penalized = [&](double b0, const Eigen::VectorXd& beta, double* deviance) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += w(i) * log_likelihood_term(y(i), b0 + x.row(i).dot(beta));
    *deviance = -2.0 * ll;
    double pen = 0.0;
    if (penalty == Penalty::ridge) pen = 0.5 * lambda * beta.squaredNorm();
    if (penalty == Penalty::lasso) pen = lambda * beta.lpNorm<1>();
    return -ll / w_sum + pen;
  };

  double dev = 0.0;
  double obj = penalized(fit.intercept, fit.beta, &dev);
  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    Eigen::VectorXd eta = (x * fit.beta).array() + fit.intercept;
    Eigen::VectorXd z(n), ww(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      const double v = std::max(pi * (1.0 - pi), 1e-10);
      z(i) = eta(i) + (y(i) - pi) / v;
      ww(i) = w(i) * v;
    }
    const double lambda_eff = lambda * w_sum / ww.sum();
    LinearFit step;
    switch (penalty) {
      case Penalty::none: step = weighted_least_squares(x, z, ww); break;
      case Penalty::ridge: step = ridge(x, z, ww, lambda_eff); break;
      case Penalty::lasso: step = lasso(x, z, ww, lambda_eff, 10000, 1e-12); break;
    }
    if (!all_finite(step)) return fit;

    // Step halving keeps the penalized objective from increasing.
    double next_dev = 0.0;
    double next_obj = penalized(step.intercept, step.beta, &next_dev);
    double t = 1.0;
    for (int h = 0; h < 30 && !(next_obj <= obj + 1e-12 * std::abs(obj)); ++h) {
      t *= 0.5;
      step.intercept = fit.intercept + t * (step.intercept - fit.intercept);
      step.beta = fit.beta + t * (step.beta - fit.beta);
      next_obj = penalized(step.intercept, step.beta, &next_dev);
    }
    fit.intercept = step.intercept;
    fit.beta = step.beta;
    const bool done = std::abs(next_dev - dev) / (std::abs(next_dev) + 0.1) < 1e-8;
    dev = next_dev;
    obj = next_obj;
    if (!std::isfinite(obj)) return fit;
    if (done) {
      fit.converged = all_finite(fit);
      break;
    }
  }
  return fit;
}

}  // namespace posl::detail
