#pragma once

// Brute-force reference implementations. Deliberately naive: loops, full
// enumeration, long double accumulation. Nothing here calls the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // [row][column]

inline double weighted_sse(const Matrix& p, const std::vector<double>& y, const std::vector<double>& w,
                           const std::vector<double>& a) {
  long double s = 0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    long double f = 0;
    for (std::size_t c = 0; c < a.size(); ++c) f += static_cast<long double>(p[r][c]) * a[c];
    const long double e = y[r] - f;
    s += w[r] * e * e;
  }
  return static_cast<double>(s);
}

/// Literal grid over [0, hi]^C with the given step (C <= 2 only).
inline double grid_nnls(const Matrix& p, const std::vector<double>& y, const std::vector<double>& w, double step,
                        double hi, std::vector<double>* best_alpha = nullptr) {
  const std::size_t c = p.empty() ? 0 : p[0].size();
  const int m = static_cast<int>(std::llround(hi / step));
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> a(c, 0.0);
  if (c == 1) {
    for (int i = 0; i <= m; ++i) {
      a[0] = i * step;
      const double v = weighted_sse(p, y, w, a);
      if (v < best) best = v, best_alpha ? (void)(*best_alpha = a) : (void)0;
    }
  } else if (c == 2) {
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        a[0] = i * step;
        a[1] = j * step;
        const double v = weighted_sse(p, y, w, a);
        if (v < best) best = v, best_alpha ? (void)(*best_alpha = a) : (void)0;
      }
  }
  return best;
}

/// Search restricted to the step lattice of [0, hi]^C for C = 3, 4: a coarse
/// full grid, then local lattice moves at successively finer steps down to
/// `step`. Returns a value attained at a lattice point.
inline double lattice_nnls(const Matrix& p, const std::vector<double>& y, const std::vector<double>& w,
                           double step, double hi) {
  const std::size_t c = p[0].size();
  const double coarse = 0.05;
  const int m = static_cast<int>(std::llround(hi / coarse));
  std::vector<double> a(c, 0.0), best_a(c, 0.0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(c, 0);
  while (true) {
    for (std::size_t k = 0; k < c; ++k) a[k] = idx[k] * coarse;
    const double v = weighted_sse(p, y, w, a);
    if (v < best) best = v, best_a = a;
    std::size_t k = 0;
    while (k < c && ++idx[k] > m) idx[k++] = 0;
    if (k == c) break;
  }
  for (double s : {0.01, step}) {
    bool moved = true;
    while (moved) {
      moved = false;
      // all 3^C - 1 neighbour moves
      std::vector<int> d(c, -1);
      while (true) {
        bool zero = true;
        for (int v : d) zero = zero && v == 0;
        if (!zero) {
          std::vector<double> t = best_a;
          bool ok = true;
          for (std::size_t k = 0; k < c; ++k) {
            t[k] = std::round((t[k] + d[k] * s) / step) * step;
            if (t[k] < 0 || t[k] > hi + 1e-12) ok = false;
          }
          if (ok) {
            const double v = weighted_sse(p, y, w, t);
            if (v < best - 1e-15) best = v, best_a = t, moved = true;
          }
        }
        std::size_t k = 0;
        while (k < c && ++d[k] > 1) d[k++] = -1;
        if (k == c) break;
      }
    }
  }
  return best;
}

/// Exact NNLS minimum by enumerating every support set: unconstrained
/// weighted least squares on the support via normal equations, kept when
/// all coefficients are non-negative.
inline double enumerate_nnls(const Matrix& p, const std::vector<double>& y, const std::vector<double>& w,
                             std::vector<double>* best_alpha = nullptr) {
  const std::size_t c = p[0].size();
  double best = weighted_sse(p, y, w, std::vector<double>(c, 0.0));
  if (best_alpha) best_alpha->assign(c, 0.0);
  for (unsigned mask = 1; mask < (1u << c); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k < c; ++k)
      if (mask & (1u << k)) s.push_back(k);
    const auto q = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(q);
    for (std::size_t r = 0; r < y.size(); ++r)
      for (Eigen::Index i = 0; i < q; ++i) {
        h(i) += w[r] * p[r][s[i]] * y[r];
        for (Eigen::Index j = 0; j < q; ++j) g(i, j) += w[r] * p[r][s[i]] * p[r][s[j]];
      }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
    if (lu.rank() < q) continue;
    const Eigen::VectorXd x = lu.solve(h);
    if ((x.array() < 0).any()) continue;
    std::vector<double> a(c, 0.0);
    for (Eigen::Index i = 0; i < q; ++i) a[s[i]] = x(i);
    const double v = weighted_sse(p, y, w, a);
    if (v < best) {
      best = v;
      if (best_alpha) *best_alpha = a;
    }
  }
  return best;
}

inline double loss_of(double y, double f, bool nll) {
  if (!nll) return (y - f) * (y - f);
  const double q = std::min(std::max(f, 1e-12), 1.0 - 1e-12);
  return -(y * std::log(q) + (1 - y) * std::log(1 - q));
}

/// Exhaustive dSL: first column with the smallest weighted loss.
inline int dsl_argmin(const Matrix& p, const std::vector<double>& y, const std::vector<double>& w, bool nll) {
  int best = -1;
  long double best_v = 0;
  for (std::size_t c = 0; c < p[0].size(); ++c) {
    long double v = 0;
    for (std::size_t r = 0; r < y.size(); ++r) v += w[r] * loss_of(y[r], p[r][c], nll);
    if (best < 0 || v < best_v) best = static_cast<int>(c), best_v = v;
  }
  return best;
}

/// Every (positive, negative) pair: 1 if the positive scores higher, 1/2 if tied.
inline double auc_pairs(const std::vector<double>& labels, const std::vector<double>& scores) {
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[i] == 1 && labels[j] == 0) {
        den += 1;
        num += scores[i] > scores[j] ? 1.0L : scores[i] == scores[j] ? 0.5L : 0.0L;
      }
  return static_cast<double>(num / den);
}

inline double median_by_sort(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mdae(const std::vector<double>& y, const std::vector<double>& f) {
  std::vector<double> e;
  for (std::size_t i = 0; i < y.size(); ++i) e.push_back(std::abs(y[i] - f[i]));
  return median_by_sort(e);
}

inline double mse(const std::vector<double>& y, const std::vector<double>& f) {
  long double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * static_cast<long double>(y[i] - f[i]);
  return static_cast<double>(s / y.size());
}

inline double calib_intercept(const std::vector<double>& y, const std::vector<double>& f) {
  long double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] - f[i];
  return static_cast<double>(s / y.size());
}

/// Slope from the 2x2 normal equations of y on (1, f).
inline double calib_slope(const std::vector<double>& y, const std::vector<double>& f) {
  long double n = y.size(), sf = 0, sy = 0, sff = 0, sfy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sf += f[i];
    sy += y[i];
    sff += static_cast<long double>(f[i]) * f[i];
    sfy += static_cast<long double>(f[i]) * y[i];
  }
  return static_cast<double>((n * sfy - sf * sy) / (n * sff - sf * sf));
}

/// TP/n - FP/n * w by counting.
inline double net_benefit(const std::vector<double>& labels, const std::vector<double>& scores, double t,
                          double w) {
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1;
  const double n = static_cast<double>(labels.size());
  return tp / n - fp / n * w;
}

struct MetaFixture {
  Matrix p;
  std::vector<double> y, w;
};

/// Entries in [0, 1], positive weights.
inline MetaFixture random_meta(std::mt19937_64& rng, int rows, int cols, bool binary_y = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0), uw(0.1, 1.0);
  MetaFixture f;
  f.p.assign(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
  for (auto& row : f.p)
    for (auto& v : row) v = u(rng);
  for (int r = 0; r < rows; ++r) {
    f.y.push_back(binary_y ? (u(rng) < 0.5 ? 0.0 : 1.0) : u(rng));
    f.w.push_back(uw(rng));
  }
  return f;
}

}  // namespace oracle
