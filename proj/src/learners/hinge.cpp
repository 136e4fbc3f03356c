#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "posl/detail/kernels.hpp"
#include "posl/error.hpp"

namespace posl::detail {

std::vector<double> candidate_knots(std::span<const double> values, int min_span, int max_knots) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<long>(v.size());
  const long span = std::max(1, min_span);
  std::vector<double> eligible;
  for (long k = 0; k < n;) {
    long end = k;
    while (end < n && v[static_cast<std::size_t>(end)] == v[static_cast<std::size_t>(k)]) ++end;
    // `end` observations are <= v[k]
    if (end >= span && n - end >= span) eligible.push_back(v[static_cast<std::size_t>(k)]);
    k = end;
  }
  const auto m = static_cast<long>(eligible.size());
  if (max_knots <= 0 || m <= max_knots) return eligible;
  std::vector<double> thinned;
  if (max_knots == 1) {
    thinned.push_back(eligible[static_cast<std::size_t>((m - 1) / 2)]);
    return thinned;
  }
  for (long i = 0; i < max_knots; ++i) {
    const long idx = std::lround(static_cast<double>(i) * static_cast<double>(m - 1) /
                                 static_cast<double>(max_knots - 1));
    const double knot = eligible[static_cast<std::size_t>(idx)];
    if (thinned.empty() || thinned.back() != knot) thinned.push_back(knot);
  }
  return thinned;
}

Eigen::MatrixXd hinge_design(const ConstMatrixRef& x, const std::vector<HingeTerm>& basis) {
  Eigen::MatrixXd b(x.rows(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      b(i, static_cast<Eigen::Index>(k)) = basis[k].eval(x(i, basis[k].variable));
  return b;
}

namespace {

/// Weighted Gram-Schmidt basis with a running residual.
class OrthoBasis {
 public:
  OrthoBasis(const Eigen::VectorXd& w, const Eigen::VectorXd& y) : w_(w) {
    Eigen::VectorXd one = Eigen::VectorXd::Ones(w.size());
    q_.push_back(one / std::sqrt(w.sum()));
    residual_ = y - q_[0] * inner(q_[0], y);
  }

  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (a.array() * b.array() * w_.array()).sum();
  }

  /// Orthonormal direction of h against the basis plus `extra`; empty when
  /// h is (numerically) inside their span.
  Eigen::VectorXd orthonormalize(const Eigen::VectorXd& h, const Eigen::VectorXd* extra,
                                 int passes = 1) const {
    const double h_norm = inner(h, h);
    if (!(h_norm > 0.0)) return {};
    Eigen::VectorXd u = h;
    for (int pass = 0; pass < passes; ++pass) {
      for (const auto& q : q_) u -= q * inner(q, u);
      if (extra && extra->size()) u -= *extra * inner(*extra, u);
    }
    const double nu = inner(u, u);
    if (!(nu > 1e-10 * h_norm)) return {};
    return u / std::sqrt(nu);
  }

  double gain(const Eigen::VectorXd& e) const {
    if (!e.size()) return 0.0;
    const double c = inner(e, residual_);
    return c * c;
  }

  void add(const Eigen::VectorXd& e) {
    residual_ -= e * inner(e, residual_);
    q_.push_back(e);
  }

  double rss() const { return inner(residual_, residual_); }

 private:
  const Eigen::VectorXd& w_;
  std::vector<Eigen::VectorXd> q_;
  Eigen::VectorXd residual_;
};

double subset_rss(const Eigen::MatrixXd& full, const std::vector<int>& cols, const Eigen::VectorXd& sw,
                  const Eigen::VectorXd& y) {
  Eigen::MatrixXd a(full.rows(), static_cast<Eigen::Index>(cols.size()) + 1);
  a.col(0) = sw;
  for (std::size_t k = 0; k < cols.size(); ++k)
    a.col(static_cast<Eigen::Index>(k) + 1) = sw.cwiseProduct(full.col(cols[k]));
  const Eigen::VectorXd b = sw.cwiseProduct(y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::VectorXd coef = qr.solve(b);
  return (b - a * coef).squaredNorm();
}

}  // namespace

HingeModel hinge_spline(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const HingeOptions& options) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0) throw ArgumentError("hinge_spline: empty input");
  const double w_sum = w.sum();
  if (!(w_sum > 0.0)) throw ArgumentError("hinge_spline: weights sum to zero");

  std::vector<std::vector<double>> knots(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col;
    for (Eigen::Index i = 0; i < n; ++i)
      if (w(i) > 0.0) col.push_back(x(i, j));
    knots[static_cast<std::size_t>(j)] = candidate_knots(col, options.min_span, options.max_knots);
  }

  HingeModel model;
  OrthoBasis ortho(w, y);
  const double rss0 = ortho.rss();
  const int max_pairs = std::max(0, (options.max_terms - 1) / 2);
  std::set<std::pair<int, double>> used;
  Eigen::VectorXd hp(n), hm(n);
  for (int step = 0; step < max_pairs; ++step) {
    double best_gain = 0.0;
    int best_var = -1;
    double best_knot = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (double c : knots[static_cast<std::size_t>(j)]) {
        if (used.count({static_cast<int>(j), c})) continue;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = x(i, j) - c;
          hp(i) = d > 0.0 ? d : 0.0;
          hm(i) = d < 0.0 ? -d : 0.0;
        }
        const Eigen::VectorXd e1 = ortho.orthonormalize(hp, nullptr);
        const Eigen::VectorXd e2 = ortho.orthonormalize(hm, &e1);
        const double g = ortho.gain(e1) + ortho.gain(e2);
        if (g > best_gain) {
          best_gain = g;
          best_var = static_cast<int>(j);
          best_knot = c;
        }
      }
    }
    if (best_var < 0 || !(best_gain > options.min_improvement * rss0)) break;
    used.insert({best_var, best_knot});
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = x(i, best_var) - best_knot;
      hp(i) = d > 0.0 ? d : 0.0;
      hm(i) = d < 0.0 ? -d : 0.0;
    }
    const Eigen::VectorXd e1 = ortho.orthonormalize(hp, nullptr, 2);
    if (e1.size()) {
      ortho.add(e1);
      model.forward_basis.push_back({best_var, best_knot, +1});
    }
    const Eigen::VectorXd e2 = ortho.orthonormalize(hm, nullptr, 2);
    if (e2.size()) {
      ortho.add(e2);
      model.forward_basis.push_back({best_var, best_knot, -1});
    }
  }

  // Backward pruning: drop the term whose removal hurts RSS least, then keep
  // the subset with the smallest GCV (ties favour fewer terms).
  const Eigen::MatrixXd full = hinge_design(x, model.forward_basis);
  const Eigen::VectorXd sw = w.array().sqrt();
  long n_eff = 0;
  for (Eigen::Index i = 0; i < n; ++i) n_eff += w(i) > 0.0;
  auto gcv = [&](const std::vector<int>& cols, double rss) {
    std::set<std::pair<int, double>> kn;
    for (int c : cols) kn.insert({model.forward_basis[static_cast<std::size_t>(c)].variable,
                                  model.forward_basis[static_cast<std::size_t>(c)].knot});
    const double complexity = 1.0 + static_cast<double>(cols.size()) +
                              options.gcv_penalty * static_cast<double>(kn.size());
    const double denom = 1.0 - complexity / static_cast<double>(n_eff);
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return (rss / w_sum) / (denom * denom);
  };

  std::vector<int> current(model.forward_basis.size());
  for (std::size_t k = 0; k < current.size(); ++k) current[k] = static_cast<int>(k);
  std::vector<std::vector<int>> best_by_size(current.size() + 1);
  std::vector<double> gcv_by_size(current.size() + 1, std::numeric_limits<double>::infinity());
  best_by_size[current.size()] = current;
  gcv_by_size[current.size()] = gcv(current, subset_rss(full, current, sw, y));
  while (!current.empty()) {
    double best_rss = std::numeric_limits<double>::infinity();
    std::size_t drop = 0;
    for (std::size_t k = 0; k < current.size(); ++k) {
      std::vector<int> trial = current;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
      const double r = subset_rss(full, trial, sw, y);
      if (r < best_rss) {
        best_rss = r;
        drop = k;
      }
    }
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
    best_by_size[current.size()] = current;
    gcv_by_size[current.size()] = gcv(current, best_rss);
  }
  std::size_t chosen = 0;
  for (std::size_t k = 1; k < gcv_by_size.size(); ++k)
    if (gcv_by_size[k] < gcv_by_size[chosen]) chosen = k;
  model.gcv_by_size = gcv_by_size;
  for (int c : best_by_size[chosen]) model.basis.push_back(model.forward_basis[static_cast<std::size_t>(c)]);
  std::sort(model.basis.begin(), model.basis.end(), [](const HingeTerm& a, const HingeTerm& b) {
    return std::tie(a.variable, a.knot, a.direction) < std::tie(b.variable, b.knot, b.direction);
  });

  const auto fit = weighted_least_squares(hinge_design(x, model.basis), y, w);
  model.intercept = fit.intercept;
  model.coefficients.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  model.converged = fit.converged;
  return model;
}

}  // namespace posl::detail
