#include <doctest.h>

#include <algorithm>
#include <set>

#include "posl/error.hpp"
#include "posl/paneldata.hpp"

using namespace posl;

namespace {

SchemaSidecar one_covariate_sidecar() {
  SchemaSidecar s;
  s.entries.push_back({"albumin", {ColumnKind::continuous, ColumnRole::session, {}}});
  return s;
}

Schema one_covariate_schema() {
  Schema s;
  s.columns.push_back({"x", ColumnKind::continuous, ColumnRole::session, {}});
  return s;
}

IndividualSeries series_of(const std::vector<MaybeReal>& x, const std::vector<MaybeReal>& y) {
  IndividualSeries s;
  s.id = "A";
  for (std::size_t t = 0; t < x.size(); ++t)
    s.sessions.push_back({static_cast<int>(t + 1), y[t], {x[t]}});
  return s;
}

Fallbacks fallback_one(double v) { return {{}, {v}, 0.0}; }

}  // namespace

TEST_CASE("csv: two individuals with three full sessions") {
  const std::string csv =
      "individual_id,session_index,outcome,albumin\n"
      "A,1,20,3.1\nA,2,21,3.2\nA,3,22,3.3\n"
      "B,1,30,4.1\nB,2,31,4.2\nB,3,32,4.3\n";
  const auto d = parse_panel_csv(csv, one_covariate_sidecar());
  REQUIRE(d.individuals.size() == 2);
  CHECK(d.individuals[0].length() == 3);
  CHECK(d.individuals[1].length() == 3);
  CHECK(*d.individuals[1].sessions[2].outcome == 32.0);
  CHECK(*d.individuals[0].sessions[1].covariates[0] == 3.2);
}

TEST_CASE("csv: empty cell is missing, not zero") {
  const std::string csv = "individual_id,session_index,outcome,albumin\nA,1,20,\nA,2,21,0\n";
  const auto d = parse_panel_csv(csv, one_covariate_sidecar());
  CHECK_FALSE(d.individuals[0].sessions[0].covariates[0].has_value());
  CHECK(d.individuals[0].sessions[1].covariates[0] == 0.0);
}

TEST_CASE("csv: non-monotone session index is rejected") {
  const std::string csv = "individual_id,session_index,outcome,albumin\nA,1,20,1\nA,3,21,1\nA,2,22,1\n";
  try {
    parse_panel_csv(csv, one_covariate_sidecar());
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("non-monotone session index") != std::string::npos);
  }
}

TEST_CASE("csv: round trip through format_panel_csv") {
  SimulationConfig c;
  c.n_individuals = 3;
  c.min_sessions = 5;
  c.max_sessions = 8;
  c.missing_rate = 0.2;
  const auto d = simulate_panel(c);
  SchemaSidecar side;
  for (const auto& col : d.schema.columns) side.entries.push_back({col.name, {col.kind, col.role, col.levels}});
  const auto back = parse_panel_csv(format_panel_csv(d), side);
  CHECK(format_panel_csv(back) == format_panel_csv(d));
}

TEST_CASE("features: missing covariate imputed by the median of prior values") {
  auto s = series_of({2.0, 4.0, 6.0, std::nullopt}, {1.0, 1.0, 1.0, 1.0});
  FeatureConfig cfg;
  cfg.covariate_lag = 0;
  const auto row = build_features(one_covariate_schema(), s, 4, fallback_one(-1), cfg);
  CHECK(row.values[0] == 4.0);
  CHECK(row.missing_indicators == std::vector<std::uint8_t>{1});
}

TEST_CASE("features: complete row passes through with zero indicators") {
  auto s = series_of({2.0, 4.0, 6.0, 8.0}, {1.0, 1.0, 1.0, 1.0});
  FeatureConfig cfg;
  cfg.covariate_lag = 0;
  const auto row = build_features(one_covariate_schema(), s, 4, fallback_one(-1), cfg);
  CHECK(row.values[0] == 8.0);
  CHECK(row.missing_indicators == std::vector<std::uint8_t>{0});
}

TEST_CASE("features: outcome rolling mean") {
  auto s = series_of({1.0, 1.0, 1.0, 1.0}, {20.0, 24.0, 28.0, 99.0});
  FeatureConfig cfg;
  cfg.outcome_window = 3;
  const auto names = feature_names(one_covariate_schema(), cfg);
  const auto at = std::find(names.begin(), names.end(), "outcome_mean") - names.begin();
  const auto row = build_features(one_covariate_schema(), s, 4, fallback_one(0), cfg);
  CHECK(row.values[static_cast<std::size_t>(at)] == 24.0);
}

TEST_CASE("features: no value at or after t is read (default lag)") {
  SimulationConfig c;
  c.n_individuals = 4;
  c.min_sessions = c.max_sessions = 30;
  c.missing_rate = 0.1;
  const auto d = simulate_panel(c);
  const auto fb = compute_fallbacks(d);
  FeatureConfig cfg;
  cfg.history_covariates = {"x1", "x2"};
  for (const auto& ind : d.individuals)
    for (int t = 1; t <= 30; t += 3) {
      const auto ref = build_features(d.schema, ind, t, fb, cfg).design();
      auto mutated = ind;
      for (int p = t; p <= 30; ++p) {
        auto& r = mutated.sessions[static_cast<std::size_t>(p - 1)];
        r.outcome = 1e6;
        for (auto& v : r.covariates) v = v ? MaybeReal{} : MaybeReal{-1e6};
      }
      CHECK(build_features(d.schema, mutated, t, fb, cfg).design() == ref);
    }
}

TEST_CASE("features: indicator is 1 exactly when the source value is missing") {
  SimulationConfig c;
  c.n_individuals = 5;
  c.min_sessions = c.max_sessions = 40;
  c.missing_rate = 0.3;
  const auto d = simulate_panel(c);
  const auto fb = compute_fallbacks(d);
  FeatureConfig cfg;
  const auto nb = d.schema.n_baseline();
  for (const auto& ind : d.individuals)
    for (int t = 1; t <= 40; ++t) {
      const auto row = build_features(d.schema, ind, t, fb, cfg);
      for (std::size_t j = 0; j < nb; ++j) CHECK(row.missing_indicators[j] == (ind.baseline[j] ? 0 : 1));
      for (std::size_t j = 0; j < d.schema.n_session(); ++j) {
        const bool missing = t == 1 || !ind.sessions[static_cast<std::size_t>(t - 2)].covariates[j];
        CHECK(row.missing_indicators[nb + j] == (missing ? 1 : 0));
      }
    }
}

TEST_CASE("split: partition sizes, union and determinism") {
  SimulationConfig c;
  c.n_individuals = 10;
  c.min_sessions = c.max_sessions = 3;
  const auto d = simulate_panel(c);
  const auto [a, b] = split_tuning_working(d, 0.6, 7);
  CHECK(a.individuals.size() == 6);
  CHECK(b.individuals.size() == 4);
  std::set<std::string> ids;
  for (const auto* part : {&a, &b})
    for (const auto& i : part->individuals) ids.insert(i.id);
  CHECK(ids.size() == 10);
  const auto [a2, b2] = split_tuning_working(d, 0.6, 7);
  CHECK(format_panel_csv(a2) == format_panel_csv(a));

  auto shuffled = d;
  std::reverse(shuffled.individuals.begin(), shuffled.individuals.end());
  const auto [a3, b3] = split_tuning_working(shuffled, 0.6, 7);
  CHECK(format_panel_csv(a3) == format_panel_csv(a));
}

TEST_CASE("split: one individual cannot be split") {
  SimulationConfig c;
  c.n_individuals = 1;
  c.min_sessions = c.max_sessions = 3;
  try {
    split_tuning_working(simulate_panel(c), 0.5, 1);
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("empty partition") != std::string::npos);
  }
}

TEST_CASE("simulate: determinism, config echo and seed sensitivity") {
  SimulationConfig c;
  CHECK(format_panel_csv(simulate_panel(c)) == format_panel_csv(simulate_panel(c)));
  const auto d = simulate_panel(c);
  CHECK(d.individuals.size() == 40);
  for (const auto& i : d.individuals) {
    CHECK(i.length() >= 200);
    CHECK(i.length() <= 300);
  }
  c.n_individuals = 3;
  c.min_sessions = c.max_sessions = 20;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    auto c1 = c, c2 = c;
    c1.seed = s;
    c2.seed = s + 100;
    CHECK(format_panel_csv(simulate_panel(c1)) != format_panel_csv(simulate_panel(c2)));
  }
}

TEST_CASE("simulate: degenerate DGP equals the linear predictor") {
  SimulationConfig c;
  c.n_individuals = 3;
  c.min_sessions = c.max_sessions = 25;
  c.noise_sd = 0;
  c.individual_effect_sd = 0;
  c.drift_slope = 0;
  c.missing_rate = 0;
  SimulationTruth truth;
  const auto d = simulate_panel(c, &truth);
  for (std::size_t i = 0; i < d.individuals.size(); ++i)
    for (int t = 1; t <= 25; ++t) {
      std::vector<double> prev;
      if (t > 1) prev = truth.covariates[i][static_cast<std::size_t>(t - 2)];
      // independent re-derivation of the DGP
      double eta = c.intercept + 0.5 * truth.ages[i] + (truth.sites[i] == 2 ? 1.0 : truth.sites[i] == 3 ? -1.0 : 0.0);
      for (std::size_t j = 0; j < prev.size(); ++j) eta += (j % 2 ? -1.0 : 1.0) * 2.0 / (1.0 + j) * prev[j];
      CHECK(*d.individuals[i].sessions[static_cast<std::size_t>(t - 1)].outcome == doctest::Approx(eta).epsilon(1e-12));
    }
}

TEST_CASE("simulate: invalid config") {
  SimulationConfig c;
  c.n_individuals = 0;
  CHECK_THROWS_AS(simulate_panel(c), ConfigError);
}

TEST_CASE("fallbacks: medians and modes of the pool") {
  Schema s;
  s.columns.push_back({"b", ColumnKind::binary, ColumnRole::session, {}});
  s.columns.push_back({"c", ColumnKind::continuous, ColumnRole::session, {}});
  PanelDataset d{s, {}};
  IndividualSeries i;
  i.id = "A";
  i.sessions = {{1, 10.0, {1.0, 1.0}}, {2, 20.0, {0.0, 3.0}}, {3, 30.0, {1.0, std::nullopt}}, {4, 40.0, {0.0, 8.0}}};
  d.individuals.push_back(i);
  const auto fb = compute_fallbacks(d);
  CHECK(fb.session[0] == 0.0);  // tie between 0 and 1 goes to the lower code
  CHECK(fb.session[1] == 3.0);
  CHECK(fb.outcome == 25.0);
}
