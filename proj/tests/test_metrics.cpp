#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "posl/error.hpp"
#include "posl/metrics.hpp"

using namespace posl;

TEST_CASE("accuracy examples") {
  const std::vector<double> y{10, 10, 10}, f{9, 12, 13};
  const auto a = accuracy_stats(y, f);
  CHECK(a.mdae == 2.0);
  CHECK(a.mse == doctest::Approx(14.0 / 3.0).epsilon(1e-15));
  const auto p = accuracy_stats(y, y);
  CHECK(p.mdae == 0.0);
  CHECK(p.mse == 0.0);
  const std::vector<double> y2{0, 0}, f2{1, -3};
  CHECK(accuracy_stats(y2, f2).mdae == 2.0);
}

TEST_CASE("calibration examples") {
  const std::vector<double> f{1, 2, 3, 4, 5};
  std::vector<double> shift, scale;
  for (double v : f) shift.push_back(v + 2);
  const std::vector<double> centred{-2, -1, 0, 1, 2};
  for (double v : centred) scale.push_back(2 * v);
  CHECK(calibration_stats(shift, f).intercept == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(*calibration_stats(shift, f).slope == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(*calibration_stats(scale, centred).slope == doctest::Approx(2.0).epsilon(1e-14));
  const auto ideal = calibration_stats(f, f);
  CHECK(ideal.intercept == 0.0);
  CHECK(*ideal.slope == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  const auto c = calibration_stats(f, flat);
  CHECK_FALSE(c.slope.has_value());
  CHECK(c.intercept == 0.0);
}

TEST_CASE("calibration curve examples") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 50);
  std::vector<double> f, y, y2;
  for (int i = 0; i < 100; ++i) {
    f.push_back(u(rng));
    y.push_back(f.back());
    y2.push_back(f.back() + 2);
  }
  for (const auto& [x, o] : calibration_curve(y, f, CurveMethod::binned, 10).points) CHECK(std::abs(o - x) < 1e-8);
  for (const auto& [x, o] : calibration_curve(y2, f, CurveMethod::binned, 10).points) CHECK(std::abs(o - x - 2) < 1e-8);

  std::vector<double> p, sq;
  for (int i = 0; i < 500; ++i) {
    p.push_back(i / 499.0);
    sq.push_back(p.back() * p.back());
  }
  const auto ll = calibration_curve(sq, p, CurveMethod::local_linear, 21, 0.3);
  REQUIRE(ll.points.size() == 21);
  for (const auto& [x, o] : ll.points)
    if (x > 0.15 && x < 0.85) CHECK(std::abs(o - x * x) < 0.02);
  CHECK_THROWS_AS(calibration_curve(y, f, CurveMethod::binned, 60), ArgumentError);
}

TEST_CASE("auroc examples") {
  const std::vector<double> l{0, 0, 1, 1}, s{0.1, 0.4, 0.35, 0.8};
  CHECK(*auroc(l, s).auc == 0.75);
  CHECK(*auroc(l, l).auc == 1.0);
  const std::vector<double> same{0.3, 0.3, 0.3, 0.3};
  CHECK(*auroc(l, same).auc == 0.5);
  const std::vector<double> one{1, 1, 1};
  const auto u = auroc(one, std::vector<double>{0.1, 0.2, 0.3});
  CHECK_FALSE(u.auc.has_value());
  CHECK_FALSE(u.reason.empty());
  const auto ci = auroc(l, s, true);
  REQUIRE(ci.ci.has_value());
  CHECK(ci.ci->first <= 0.75);
  CHECK(ci.ci->second >= 0.75);
}

TEST_CASE("decision curve examples") {
  // n = 10, p = 0.5, at t = 0.5: TP = 3, FP = 2
  const std::vector<double> l{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1, 0.1, 0.6, 0.6, 0.1, 0.1, 0.1};
  const double t[] = {0.5};
  const auto dc = decision_curve(l, s, t, NetBenefitWeight::prevalence_odds);
  CHECK(dc.net_benefit[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(dc.treat_all[0] == doctest::Approx(0.0).epsilon(1e-15));
  const double ts[] = {0.2, 0.5, 0.99};
  for (double nb : decision_curve(l, l, ts, NetBenefitWeight::prevalence_odds).net_benefit) CHECK(nb == 0.5);
  const double none[] = {1.5};
  CHECK(decision_curve(l, s, none, NetBenefitWeight::prevalence_odds).net_benefit[0] == 0.0);
  const std::vector<double> ones(4, 1.0);
  CHECK_THROWS_AS(decision_curve(ones, ones, t, NetBenefitWeight::prevalence_odds), ArgumentError);
  const double bad[] = {1.0};
  CHECK_THROWS_AS(decision_curve(l, s, bad, NetBenefitWeight::threshold_odds), ArgumentError);
}

TEST_CASE("metric oracles on random fixtures") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rep % 49;
    std::vector<double> y, f, lab, sc;
    for (int i = 0; i < n; ++i) {
      y.push_back(20 + 10 * u(rng));
      f.push_back(20 + 10 * u(rng));
      lab.push_back(i % 2 ? 1.0 : (u(rng) < 0.5 ? 1.0 : 0.0));
      sc.push_back(std::round(u(rng) * 8) / 8);  // coarse, so ties occur
    }
    lab[0] = 0;
    const auto a = accuracy_stats(y, f);
    CHECK(std::abs(a.mdae - oracle::mdae(y, f)) < 1e-10);
    CHECK(std::abs(a.mse - oracle::mse(y, f)) < 1e-10);
    const auto c = calibration_stats(y, f);
    CHECK(std::abs(c.intercept - oracle::calib_intercept(y, f)) < 1e-10);
    CHECK(std::abs(*c.slope - oracle::calib_slope(y, f)) < 1e-10);
    CHECK(std::abs(*auroc(lab, sc).auc - oracle::auc_pairs(lab, sc)) < 1e-10);

    std::vector<double> ex;
    for (double v : sc) ex.push_back(std::exp(3 * v));
    CHECK(*auroc(lab, ex).auc == *auroc(lab, sc).auc);

    const double p = std::count(lab.begin(), lab.end(), 1.0) / static_cast<double>(n);
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 0.9};
    const auto dc = decision_curve(lab, sc, ts, NetBenefitWeight::prevalence_odds);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      CHECK(std::abs(dc.net_benefit[k] - oracle::net_benefit(lab, sc, ts[k], p / (1 - p))) < 1e-10);
      CHECK(std::abs(dc.treat_all[k]) < 1e-10);
    }
    const auto dt = decision_curve(lab, sc, ts, NetBenefitWeight::threshold_odds);
    for (std::size_t k = 0; k < ts.size(); ++k)
      CHECK(std::abs(dt.net_benefit[k] - oracle::net_benefit(lab, sc, ts[k], ts[k] / (1 - ts[k]))) < 1e-10);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> yp, fp;
    for (int i : perm) yp.push_back(y[static_cast<std::size_t>(i)]), fp.push_back(f[static_cast<std::size_t>(i)]);
    CHECK(accuracy_stats(yp, fp).mdae == a.mdae);
    CHECK(std::abs(accuracy_stats(yp, fp).mse - a.mse) < 1e-12);
  }
}

TEST_CASE("time profiles") {
  std::vector<ProfilePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({12, 20.0, i == 0 ? 80.0 : (i % 2 ? 22.0 : 18.0)});
  for (int i = 0; i < 10; ++i) pts.push_back({13, 20.0, 21.0});
  const auto raw = time_profiles(pts, ProfileMetric::mdae, 0.0);
  REQUIRE(raw.size() == 2);
  CHECK(raw[0] == std::pair<int, double>{12, 2.0});
  CHECK(raw[1] == std::pair<int, double>{13, 1.0});
  const auto ci = time_profiles(pts, ProfileMetric::calib_intercept, 0.0);
  CHECK(ci[1].second == -1.0);

  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 5; ++i) {
    PredictionRecord r;
    r.individual_id = "P" + std::to_string(i);
    r.position = 12;
    r.observed = 20.0;
    r.esl_nonconvex.value = 22.0;
    r.candidate_ids = {"a"};
    r.candidate_predictions = {NAN};
    recs.push_back(r);
  }
  PredictionSelector sel;
  const auto prof = time_profiles(recs, sel, ProfileMetric::mdae, 0.0);
  CHECK(prof == std::vector<std::pair<int, double>>{{12, 2.0}});
  PredictionSelector cand{PredictionKind::candidate, 0, "a"};
  CHECK(time_profiles(recs, cand, ProfileMetric::mdae, 0.0).empty());
}

TEST_CASE("individual metrics label continuous outcomes at the threshold") {
  const std::vector<double> y{20, 30, 22, 28}, f{21, 29, 23, 27};
  const auto m = individual_metrics("A", y, f, OutcomeMode::continuous, 24);
  CHECK(*m.auroc == 1.0);
  CHECK(m.n == 4);
  const auto b = individual_metrics("A", std::vector<double>{0, 0}, std::vector<double>{0.2, 0.3},
                                    OutcomeMode::binary, 24);
  CHECK_FALSE(b.auroc.has_value());
}
