#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "posl/ensemble.hpp"
#include "posl/error.hpp"

using namespace posl;

namespace {

MetaDataset to_meta(const oracle::MetaFixture& f) {
  MetaDataset m;
  const auto rows = static_cast<Eigen::Index>(f.y.size());
  const auto cols = static_cast<Eigen::Index>(f.p[0].size());
  m.predictions.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m.predictions(r, c) = f.p[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  m.observed = f.y;
  m.time_weights = f.w;
  for (Eigen::Index r = 0; r < rows; ++r) m.session_indices.push_back(static_cast<int>(r + 1));
  for (Eigen::Index c = 0; c < cols; ++c) m.learner_ids.push_back("l" + std::to_string(c));
  return m;
}

oracle::MetaFixture fixture(const std::vector<std::vector<double>>& p, const std::vector<double>& y,
                            std::vector<double> w = {}) {
  if (w.empty()) w.assign(y.size(), 1.0);
  return {p, y, w};
}

}  // namespace

TEST_CASE("time weights") {
  const int s20[] = {20};
  CHECK(time_weights(20, s20)[0] == 1.0);
  const int s10[] = {10};
  CHECK(time_weights(20, s10, 0.1, 5)[0] == doctest::Approx(0.3486784401).epsilon(1e-12));
  const int all[] = {1, 5, 10, 15, 20};
  for (double w : time_weights(20, all, 0.0, 5)) CHECK(w == 1.0);
  const int edge[] = {14, 15};
  const auto we = time_weights(20, edge, 0.1, 5);
  CHECK(we[0] == doctest::Approx(std::pow(0.9, 6)));
  CHECK(we[1] == 1.0);
}

TEST_CASE("cumulative weighted loss") {
  const double y1[] = {1, 2}, w1[] = {3, 7};
  CHECK(cumulative_weighted_loss(y1, y1, w1, LossKind::squared) == 0.0);
  const double y2[] = {0, 2}, f2[] = {1, 0}, w2[] = {1, 1};
  CHECK(cumulative_weighted_loss(y2, f2, w2, LossKind::squared) == 5.0);
  const double y3[] = {1}, f3[] = {0.5}, w3[] = {1};
  CHECK(cumulative_weighted_loss(y3, f3, w3, LossKind::negative_log_likelihood) == doctest::Approx(std::log(2.0)));
  const double f4[] = {0.0};
  CHECK(std::isfinite(cumulative_weighted_loss(y3, f4, w3, LossKind::negative_log_likelihood)));
}

TEST_CASE("nnls: perfect column absorbs everything") {
  const auto f = fixture({{1, 0.3}, {2, -0.1}, {3, 0.2}, {4, 0.05}}, {1, 2, 3, 4});
  const auto a = solve_nnls(to_meta(f), false);
  CHECK(a.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle::weighted_sse(f.p, f.y, f.w, a.alpha) < 1e-20);
}

TEST_CASE("nnls: constant columns at 10 and 30 reach 20") {
  const auto f = fixture({{10, 30}, {10, 30}, {10, 30}}, {20, 20, 20});
  const auto a = solve_nnls(to_meta(f), false);
  CHECK(a.alpha[0] * 10 + a.alpha[1] * 30 == doctest::Approx(20.0).epsilon(1e-12));
  const double grid = oracle::grid_nnls(f.p, f.y, f.w, 0.001, 2.0);
  CHECK(oracle::weighted_sse(f.p, f.y, f.w, a.alpha) <= grid + 1e-6);
}

TEST_CASE("nnls: anti-correlated column gets zero weight") {
  const std::vector<double> y{1, 2, 3, 4, 5};
  std::vector<std::vector<double>> p;
  for (double v : y) p.push_back({-v, 1.0});
  const auto f = fixture(p, y);
  const auto a = solve_nnls(to_meta(f), false);
  CHECK(a.alpha[0] == 0.0);
  std::vector<double> ga;
  const double grid = oracle::grid_nnls(f.p, f.y, f.w, 0.01, 5.0, &ga);
  CHECK(ga[0] == 0.0);
  CHECK(oracle::weighted_sse(f.p, f.y, f.w, a.alpha) <= grid + 1e-9);
}

TEST_CASE("nnls: KKT, vertex dominance and convexification on random fixtures") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    const int cols = 1 + rep % 6, rows = 3 + rep % 28;
    const auto f = oracle::random_meta(rng, rows, cols);
    const auto meta = to_meta(f);
    const auto a = solve_nnls(meta, false);
    const double sse = oracle::weighted_sse(f.p, f.y, f.w, a.alpha);
    CHECK(sse <= oracle::enumerate_nnls(f.p, f.y, f.w) + 1e-10);
    for (int c = 0; c < cols; ++c) {
      double g = 0;
      for (int r = 0; r < rows; ++r) {
        double fit = 0;
        for (int k = 0; k < cols; ++k) fit += f.p[r][k] * a.alpha[k];
        g += -2 * f.w[r] * f.p[r][c] * (f.y[r] - fit);
      }
      CHECK(g >= -1e-6);
      if (a.alpha[c] > 1e-10) CHECK(std::abs(g) <= 1e-6);
      std::vector<double> e(cols, 0.0);
      e[c] = 1.0;
      CHECK(sse <= oracle::weighted_sse(f.p, f.y, f.w, e) + 1e-12);
    }
    const auto cvx = solve_nnls(meta, true);
    CHECK(cvx.convexified);
    double sum = 0, raw = 0;
    for (double v : a.alpha) raw += v;
    for (std::size_t c = 0; c < cvx.alpha.size(); ++c) {
      sum += cvx.alpha[c];
      CHECK(cvx.alpha[c] >= 0.0);
      if (raw > 0) CHECK(cvx.alpha[c] == doctest::Approx(a.alpha[c] / raw).epsilon(1e-12));
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    auto scaled = meta;
    for (double& w : scaled.time_weights) w *= 3.7;
    const auto b = solve_nnls(scaled, false);
    for (int c = 0; c < cols; ++c) CHECK(std::abs(b.alpha[c] - a.alpha[c]) < 1e-8);
    CHECK(dsl_select(scaled, LossKind::squared) == dsl_select(meta, LossKind::squared));
  }
}

TEST_CASE("convexify of zero weights is uniform") {
  const auto c = convexify({{0.0, 0.0, 0.0, 0.0}, false});
  for (double v : c.alpha) CHECK(v == 0.25);
}

TEST_CASE("dsl examples") {
  const auto exact = fixture({{1, 5, 2}, {1, 5, 3}, {1, 5, 4}}, {2, 3, 4});
  CHECK(dsl_select(to_meta(exact), LossKind::squared) == 2);
  const auto tie = fixture({{1, 1}, {2, 2}}, {0, 0});
  CHECK(dsl_select(to_meta(tie), LossKind::squared) == 0);

  // column 0 misses early, column 1 misses late
  const auto f = fixture({{13, 10}, {10, 10}, {10, 10}, {10, 12}}, {10, 10, 10, 10});
  // unweighted: 9 vs 4 -> column 1; weights (0.1, 1, 1, 1): 0.9 vs 4 -> column 0
  CHECK(dsl_select(to_meta(f), LossKind::squared) == 1);
  auto w = to_meta(f);
  w.time_weights = {0.1, 1, 1, 1};
  CHECK(dsl_select(w, LossKind::squared) == 0);
}

TEST_CASE("dsl matches exhaustive recomputation") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 300; ++rep) {
    const bool nll = rep % 2;
    const auto f = oracle::random_meta(rng, 2 + rep % 20, 1 + rep % 7, nll);
    CHECK(dsl_select(to_meta(f), nll ? LossKind::negative_log_likelihood : LossKind::squared) ==
          oracle::dsl_argmin(f.p, f.y, f.w, nll));
  }
}

TEST_CASE("combine and truncate") {
  const double p[] = {10, 30, 7};
  CHECK(combine_and_truncate(p, AlphaWeights{{0, 0, 1}, false}, 0, 50).value == 7);
  const auto mid = combine_and_truncate(std::span<const double>(p, 2), AlphaWeights{{0.5, 0.5}, true}, 0, 50);
  CHECK(mid.value == 20);
  CHECK_FALSE(mid.truncated);
  const double big[] = {60};
  const auto t = combine_and_truncate(big, 0, 0, 50);
  CHECK(t.value == 50);
  CHECK(t.raw == 60);
  CHECK(t.truncated);
  const auto again = truncate(t.value, 0, 50);
  CHECK(again.value == t.value);
  CHECK_FALSE(again.truncated);
  const double prob[] = {0.8, 0.7};
  const auto b = combine_and_truncate(prob, AlphaWeights{{1.0, 0.5}, false}, 0, 1);
  CHECK(b.value == 1.0);
  CHECK(b.truncated);
  CHECK_THROWS(truncate(NAN, 0, 1));
}

TEST_CASE("meta dataset validation") {
  auto m = to_meta(fixture({{1, 2}}, {1}));
  m.predictions(0, 1) = NAN;
  CHECK_THROWS_AS(m.validate(), ArgumentError);
}
