#include <algorithm>
#include <cmath>
#include <numeric>

#include "posl/detail/kernels.hpp"
#include "posl/error.hpp"

#ifdef POSL_HAVE_OPENMP
#include <omp.h>
#endif

namespace posl {

int available_threads() {
#ifdef POSL_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace posl

namespace posl::detail {

SortedColumns::SortedColumns(const ConstMatrixRef& x) {
  const auto n = static_cast<int>(x.rows());
  order.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, j) < x(b, j); });
  }
}

namespace {

struct NodeStats {
  double w = 0.0, g = 0.0, gg = 0.0, h = 0.0, count = 0.0;
};

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct ScanState {
  double w = 0.0, g = 0.0, count = 0.0;
  double last = 0.0;
  bool has_last = false;
};

}  // namespace

RegressionTree build_tree(const ConstMatrixRef& x, const SortedColumns& sorted, const Eigen::VectorXd& g,
                          const Eigen::VectorXd& w, const Eigen::VectorXd* hessian, LeafRule rule,
                          const TreeOptions& options, std::mt19937_64* rng,
                          std::vector<double>* gain_by_feature) {
  const auto n = static_cast<int>(x.rows());
  const auto p = static_cast<int>(x.cols());
  const double min_leaf = std::max(1, options.min_leaf);

  RegressionTree tree;
  std::vector<int> node_of(static_cast<std::size_t>(n), -1);
  std::vector<NodeStats> stats(1);
  for (int i = 0; i < n; ++i) {
    if (!(w(i) > 0.0)) continue;
    node_of[static_cast<std::size_t>(i)] = 0;
    auto& s = stats[0];
    s.w += w(i);
    s.g += w(i) * g(i);
    s.gg += w(i) * g(i) * g(i);
    if (hessian) s.h += w(i) * (*hessian)(i);
    s.count += w(i);
  }
  tree.nodes.push_back({});
  std::vector<int> depth{0};
  std::vector<int> frontier;
  auto splittable = [&](int nd) {
    const auto& s = stats[static_cast<std::size_t>(nd)];
    return s.count >= 2 * min_leaf &&
           (options.max_depth < 0 || depth[static_cast<std::size_t>(nd)] < options.max_depth);
  };
  if (splittable(0)) frontier.push_back(0);

  std::vector<std::vector<char>> uses;  // per node, features considered
  std::vector<int> perm(static_cast<std::size_t>(p));
  while (!frontier.empty()) {
    const auto n_nodes = tree.nodes.size();
    std::vector<char> in_frontier(n_nodes, 0);
    uses.assign(n_nodes, {});
    for (int nd : frontier) {
      in_frontier[static_cast<std::size_t>(nd)] = 1;
      auto& u = uses[static_cast<std::size_t>(nd)];
      if (rng && options.mtry > 0 && options.mtry < p) {
        u.assign(static_cast<std::size_t>(p), 0);
        std::iota(perm.begin(), perm.end(), 0);
        for (int k = 0; k < options.mtry; ++k) {
          const auto r = static_cast<int>((*rng)() % static_cast<std::uint64_t>(p - k));
          std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(k + r)]);
          u[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = 1;
        }
      } else {
        u.assign(static_cast<std::size_t>(p), 1);
      }
    }

    std::vector<BestSplit> best(n_nodes);
    std::vector<ScanState> scan(n_nodes);
    for (int f = 0; f < p; ++f) {
      bool any = false;
      for (int nd : frontier) any = any || uses[static_cast<std::size_t>(nd)][static_cast<std::size_t>(f)];
      if (!any) continue;
      for (int nd : frontier) scan[static_cast<std::size_t>(nd)] = {};
      for (int i : sorted.order[static_cast<std::size_t>(f)]) {
        const int nd = node_of[static_cast<std::size_t>(i)];
        if (nd < 0 || !in_frontier[static_cast<std::size_t>(nd)] ||
            !uses[static_cast<std::size_t>(nd)][static_cast<std::size_t>(f)])
          continue;
        auto& st = scan[static_cast<std::size_t>(nd)];
        const double xv = x(i, f);
        if (st.has_last && xv != st.last) {
          const auto& tot = stats[static_cast<std::size_t>(nd)];
          const double rc = tot.count - st.count;
          if (st.count >= min_leaf && rc >= min_leaf) {
            const double rw = tot.w - st.w, rg = tot.g - st.g;
            const double gain = st.g * st.g / st.w + rg * rg / rw - tot.g * tot.g / tot.w;
            auto& b = best[static_cast<std::size_t>(nd)];
            if (gain > b.gain) {
              b.gain = gain;
              b.feature = f;
              double mid = 0.5 * (st.last + xv);
              if (!(mid < xv)) mid = st.last;
              b.threshold = mid;
            }
          }
        }
        st.w += w(i);
        st.g += w(i) * g(i);
        st.count += w(i);
        st.last = xv;
        st.has_last = true;
      }
    }

    std::vector<int> next;
    std::vector<int> child_left(n_nodes, -1);
    for (int nd : frontier) {
      const auto& b = best[static_cast<std::size_t>(nd)];
      const auto& s = stats[static_cast<std::size_t>(nd)];
      const double sse = s.gg - s.g * s.g / s.w;
      if (b.feature < 0 || !(b.gain > 1e-12 * std::max(sse, 1e-300))) continue;
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.resize(tree.nodes.size());
      depth.push_back(depth[static_cast<std::size_t>(nd)] + 1);
      depth.push_back(depth[static_cast<std::size_t>(nd)] + 1);
      auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      node.feature = b.feature;
      node.threshold = b.threshold;
      node.left = l;
      node.right = l + 1;
      child_left[static_cast<std::size_t>(nd)] = l;
      if (gain_by_feature) (*gain_by_feature)[static_cast<std::size_t>(b.feature)] += b.gain;
    }
    for (int i = 0; i < n; ++i) {
      const int nd = node_of[static_cast<std::size_t>(i)];
      if (nd < 0 || static_cast<std::size_t>(nd) >= n_nodes) continue;
      const int l = child_left[static_cast<std::size_t>(nd)];
      if (l < 0) continue;
      const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      const int c = x(i, node.feature) <= node.threshold ? l : l + 1;
      node_of[static_cast<std::size_t>(i)] = c;
      auto& s = stats[static_cast<std::size_t>(c)];
      s.w += w(i);
      s.g += w(i) * g(i);
      s.gg += w(i) * g(i) * g(i);
      if (hessian) s.h += w(i) * (*hessian)(i);
      s.count += w(i);
    }
    for (std::size_t nd = n_nodes; nd < tree.nodes.size(); ++nd)
      if (splittable(static_cast<int>(nd))) next.push_back(static_cast<int>(nd));
    frontier = std::move(next);
  }

  for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
    auto& node = tree.nodes[nd];
    if (node.feature >= 0) continue;
    const auto& s = stats[nd];
    if (rule == LeafRule::newton)
      node.value = s.g / std::max(s.h, 1e-12);
    else
      node.value = s.w > 0.0 ? s.g / s.w : 0.0;
  }
  return tree;
}

BoostedModel gradient_boost(const ConstMatrixRef& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            OutcomeMode mode, int rounds, double shrinkage, const TreeOptions& options) {
  if (rounds < 0) throw ArgumentError("gbt rounds must be >= 0");
  const Eigen::Index n = x.rows();
  const double w_sum = w.sum();
  if (!(w_sum > 0.0)) throw ArgumentError("gbt: weights sum to zero");
  BoostedModel model;
  model.shrinkage = shrinkage;
  const bool binary = mode == OutcomeMode::binary;
  const double mean = w.dot(y) / w_sum;
  if (binary) {
    const double p = std::clamp(mean, 1e-12, 1.0 - 1e-12);
    model.base_score = std::log(p / (1.0 - p));
  } else {
    model.base_score = mean;
  }

  Eigen::VectorXd f = Eigen::VectorXd::Constant(n, model.base_score);
  Eigen::VectorXd g(n), h(n);
  auto loss = [&] {
    double l = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (binary) {
        const double eta = f(i);
        const double softplus = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
        l -= w(i) * (y(i) * eta - softplus);
      } else {
        const double r = y(i) - f(i);
        l += w(i) * r * r;
      }
    }
    return l;
  };
  model.training_loss.push_back(loss());
  if (rounds == 0) return model;

  const SortedColumns sorted(x);
  for (int m = 0; m < rounds; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (binary) {
        const double pi = sigmoid(f(i));
        g(i) = y(i) - pi;
        h(i) = pi * (1.0 - pi);
      } else {
        g(i) = y(i) - f(i);
      }
    }
    auto tree = build_tree(x, sorted, g, w, binary ? &h : nullptr,
                           binary ? LeafRule::newton : LeafRule::mean, options, nullptr, nullptr);
    for (Eigen::Index i = 0; i < n; ++i) f(i) += shrinkage * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.training_loss.push_back(loss());
  }
  return model;
}

}  // namespace posl::detail

namespace posl {

ScreeningReport rf_importance_screen(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const double> y,
                                     int k, int n_trees, std::uint64_t seed, const ForestOptions& options) {
  const auto n = static_cast<int>(x.rows());
  const auto p = static_cast<int>(x.cols());
  if (n == 0 || static_cast<std::size_t>(n) != y.size()) throw ArgumentError("rf screen: bad input size");
  if (k < 1 || k > p) throw ArgumentError("rf screen: k exceeds the feature count");
  if (n_trees < 1) throw ArgumentError("rf screen: need at least one tree");

  const detail::SortedColumns sorted(x);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  detail::TreeOptions topt;
  topt.max_depth = -1;
  topt.min_leaf = options.min_leaf;
  topt.mtry = options.mtry > 0 ? std::min(options.mtry, p) : std::max(1, p / 3);

  std::vector<std::vector<double>> per_tree(static_cast<std::size_t>(n_trees),
                                            std::vector<double>(static_cast<std::size_t>(p), 0.0));
  auto grow = [&](int t) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(t + 1));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) counts(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n))) += 1.0;
    auto& imp = per_tree[static_cast<std::size_t>(t)];
    auto tree = detail::build_tree(x, sorted, yv, counts, nullptr, detail::LeafRule::mean, topt, &rng,
                                   options.permutation_importance ? nullptr : &imp);
    if (!options.permutation_importance) return;
    std::vector<int> oob;
    for (int i = 0; i < n; ++i)
      if (counts(i) == 0.0) oob.push_back(i);
    if (oob.size() < 2) return;
    auto mse = [&](int permuted, const std::vector<int>& perm) {
      Eigen::RowVectorXd row;
      double s = 0.0;
      for (std::size_t a = 0; a < oob.size(); ++a) {
        row = x.row(oob[a]);
        if (permuted >= 0) row(permuted) = x(perm[a], permuted);
        const double r = yv(oob[a]) - tree.predict(row);
        s += r * r;
      }
      return s / static_cast<double>(oob.size());
    };
    const double base = mse(-1, oob);
    for (int j = 0; j < p; ++j) {
      std::vector<int> perm = oob;
      for (std::size_t a = perm.size() - 1; a > 0; --a)
        std::swap(perm[a], perm[static_cast<std::size_t>(rng() % (a + 1))]);
      imp[static_cast<std::size_t>(j)] = std::max(0.0, mse(j, perm) - base);
    }
  };

  if (options.execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < n_trees; ++t) grow(t);
  } else {
    for (int t = 0; t < n_trees; ++t) grow(t);
  }

  ScreeningReport report;
  report.importances.assign(static_cast<std::size_t>(p), 0.0);
  for (const auto& imp : per_tree)  // fixed tree order keeps the sum deterministic
    for (int j = 0; j < p; ++j) report.importances[static_cast<std::size_t>(j)] += imp[static_cast<std::size_t>(j)];
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return report.importances[static_cast<std::size_t>(a)] > report.importances[static_cast<std::size_t>(b)];
  });
  report.selected.assign(order.begin(), order.begin() + k);
  return report;
}

}  // namespace posl
