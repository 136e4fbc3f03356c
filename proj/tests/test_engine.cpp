#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "posl/engine.hpp"
#include "posl/error.hpp"

using namespace posl;

namespace {

LearnerSpec spec(Family f, Hyperparameters h = {}) {
  LearnerSpec s;
  s.family = f;
  s.hyper = std::move(h);
  return s;
}

PanelDataset panel(int n, int min_t, int max_t, double noise, std::uint64_t seed = 1, double missing = 0.0,
                   double effect_sd = 2.0) {
  SimulationConfig c;
  c.individual_effect_sd = effect_sd;
  c.n_individuals = n;
  c.min_sessions = min_t;
  c.max_sessions = max_t;
  c.noise_sd = noise;
  c.missing_rate = missing;
  c.seed = seed;
  return simulate_panel(c);
}

PanelDataset without(const PanelDataset& d, const std::string& id) {
  PanelDataset out{d.schema, {}};
  for (const auto& i : d.individuals)
    if (i.id != id) out.individuals.push_back(i);
  return out;
}

/// Every field except the observed outcome.
void check_same_prediction(const PredictionRecord& a, const PredictionRecord& b) {
  CHECK(a.individual_id == b.individual_id);
  CHECK(a.session_index == b.session_index);
  CHECK(a.position == b.position);
  CHECK(a.candidate_ids == b.candidate_ids);
  CHECK(a.candidate_predictions == b.candidate_predictions);
  CHECK(a.alpha_convex.alpha == b.alpha_convex.alpha);
  CHECK(a.alpha_nonconvex.alpha == b.alpha_nonconvex.alpha);
  CHECK(a.dsl_choice == b.dsl_choice);
  CHECK(a.dsl.raw == b.dsl.raw);
  CHECK(a.esl_convex.raw == b.esl_convex.raw);
  CHECK(a.esl_nonconvex.raw == b.esl_nonconvex.raw);
  CHECK(a.n_meta_rows == b.n_meta_rows);
  CHECK(a.dropped_folds == b.dropped_folds);
}

Library small_library() {
  return make_library({spec(Family::mean), spec(Family::linear), spec(Family::ridge, {{"lambda", 0.5}})},
                      {spec(Family::mean), spec(Family::linear), spec(Family::gbt, {{"rounds", 10}})},
                      OutcomeMode::continuous);
}

}  // namespace

TEST_CASE("make_library duplicates individual specs over both schemes") {
  const auto lib = small_library();
  CHECK(lib.individual.size() == 6);
  CHECK(lib.historical.size() == 3);
  CHECK(lib.individual[0].id() == "ind_mean_rocv");
  CHECK(lib.individual[1].id() == "ind_mean_rwcv");
  CHECK(lib.historical[2].id() == "hist_gbt");
}

TEST_CASE("fit_historical: mean is the pooled person-time mean") {
  Schema s;
  PanelDataset pool{s, {}};
  pool.individuals.push_back({"A", {}, {{1, 10.0, {}}, {2, 20.0, {}}, {3, 30.0, {}}}});
  pool.individuals.push_back({"B", {}, {{1, 1.0, {}}, {2, 2.0, {}}, {3, 3.0, {}}}});
  auto m = spec(Family::mean);
  m.scope = Scope::historical;
  const auto h = fit_historical(pool, {m}, PoslSettings{});
  REQUIRE(h.fitted.size() == 1);
  CHECK(h.fitted[0].intercept == doctest::Approx(11.0).epsilon(1e-14));
}

TEST_CASE("fit_historical: pool order does not matter") {
  const auto pool = panel(4, 20, 30, 2.0);
  auto rev = pool;
  std::reverse(rev.individuals.begin(), rev.individuals.end());
  std::vector<LearnerSpec> specs;
  for (Family f : {Family::mean, Family::linear, Family::ridge, Family::lasso, Family::hinge_spline, Family::gbt}) {
    auto s = spec(f);
    s.scope = Scope::historical;
    specs.push_back(s);
  }
  const PoslSettings st;
  const auto a = fit_historical(pool, specs, st);
  const auto b = fit_historical(rev, specs, st);
  const auto fb = compute_fallbacks(pool);
  const auto probe = prepare_series(pool.schema, pool.individuals[0], fb, st.features, st.mode, st.threshold);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    CAPTURE(specs[k].id());
    CHECK((predict(a.fitted[k], probe.design) - predict(b.fitted[k], probe.design)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit_historical: non-converged learner is dropped with a warning") {
  const auto pool = panel(3, 20, 20, 2.0);
  auto bad = spec(Family::lasso, {{"lambda", 1e-6}, {"max_iter", 1}, {"tol", 1e-300}});
  auto good = spec(Family::mean);
  bad.scope = good.scope = Scope::historical;
  const auto h = fit_historical(pool, {bad, good}, PoslSettings{});
  REQUIRE(h.fitted.size() == 1);
  CHECK(h.fitted[0].spec.family == Family::mean);
  REQUIRE(h.warnings.size() == 1);
  CHECK(h.warnings[0].find("hist_lasso") != std::string::npos);
}

TEST_CASE("single constant learner predicts the constant") {
  Schema s;
  PanelDataset d{s, {}};
  IndividualSeries i{"A", {}, {}};
  for (int t = 1; t <= 15; ++t) i.sessions.push_back({t, 25.0, {}});
  d.individuals.push_back(i);
  Library lib;
  lib.individual.push_back(spec(Family::mean));
  const auto model = make_model(d, lib, PoslSettings{});
  const auto r = posl_predict_next(model, i, 12);
  CHECK(r.esl_nonconvex.value == 25.0);
  CHECK(r.esl_convex.value == 25.0);
  CHECK(r.dsl.value == 25.0);
  CHECK(r.alpha_nonconvex.alpha == std::vector<double>{1.0});
}

TEST_CASE("noiseless shared linear DGP is recovered") {
  SimulationConfig c;
  c.n_individuals = 5;
  c.min_sessions = c.max_sessions = 20;
  c.noise_sd = 0;
  c.individual_effect_sd = 0;
  c.missing_rate = 0;
  SimulationTruth truth;
  PanelDataset d;
  // every site level must appear at two or more individuals, so each
  // leave-one-out pool identifies the site effect of the held-out individual
  for (c.seed = 1;; ++c.seed) {
    truth = {};
    d = simulate_panel(c, &truth);
    int count[4] = {0, 0, 0, 0};
    for (double s : truth.sites) ++count[static_cast<int>(s)];
    if (count[1] != 1 && count[2] != 1 && count[3] != 1) break;
  }
  const auto lib = make_library({spec(Family::mean)}, {spec(Family::linear), spec(Family::mean)}, OutcomeMode::continuous);
  const auto run = run_working_sample(d, lib, PoslSettings{}, 1);
  REQUIRE(run.records.size() == 5 * 9);
  for (const auto& r : run.records) {
    const auto i = static_cast<std::size_t>(std::stoi(r.individual_id.substr(1)) - 1);
    const double eta = simulated_linear_predictor(c, truth.ages[i], truth.sites[i], 0.0, r.session_index,
                                                  truth.covariates[i][static_cast<std::size_t>(r.session_index - 2)]);
    CHECK(std::abs(r.dsl.value - eta) < 1e-6);
    CHECK(std::abs(r.esl_convex.value - eta) < 1e-6);
    CHECK(std::abs(r.esl_nonconvex.value - eta) < 1e-6);
  }
}

TEST_CASE("no peeking: future data of the individual changes nothing") {
  const auto d = panel(4, 30, 30, 2.0, 3, 0.05);
  const auto& target = d.individuals[0];
  const auto model = make_model(without(d, target.id), small_library(), PoslSettings{}, 1);
  const int T = static_cast<int>(filter_for_mode(target, OutcomeMode::continuous).length());
  for (int tau : {6, 11, 17, 25, T - 1}) {
    const auto ref = posl_predict_next(model, target, tau);
    const int s = ref.session_index;
    auto mutated = target;
    for (auto& r : mutated.sessions)
      if (r.session_index >= s) {
        r.outcome = 49.0;
        for (auto& v : r.covariates) v = 9.0;
      }
    check_same_prediction(posl_predict_next(model, mutated, tau), ref);
  }
}

TEST_CASE("run_individual: positions, skip and incremental equivalence") {
  const auto d = panel(4, 30, 30, 2.0, 4, 0.05);
  auto& ind = d.individuals[0];
  const auto model = make_model(without(d, ind.id), small_library(), PoslSettings{}, 1);

  IndividualSeries t14 = panel(1, 14, 14, 2.0, 4).individuals[0];
  const auto r14 = run_individual(model, t14);
  REQUIRE(r14.records.size() == 3);
  CHECK(r14.records[0].position == 12);
  CHECK(r14.records[2].position == 14);

  IndividualSeries t11 = t14;
  t11.sessions.resize(11);
  const auto r11 = run_individual(model, t11);
  CHECK(r11.records.empty());
  CHECK(r11.skipped);
  REQUIRE_FALSE(r11.log.empty());
  CHECK(r11.log[0].find("series too short") != std::string::npos);

  const auto full = run_individual(model, ind);
  for (const auto& r : full.records) {
    const auto scratch = posl_predict_next(model, ind, r.position - 1);
    check_same_prediction(r, scratch);
    CHECK(r.dsl.raw == r.candidate_predictions[static_cast<std::size_t>(r.dsl_choice)]);
    for (const auto* f : {&r.dsl, &r.esl_convex, &r.esl_nonconvex}) {
      CHECK(f->value >= 0.0);
      CHECK(f->value <= 50.0);
      CHECK(f->truncated == (f->raw != f->value));
    }
  }
}

TEST_CASE("run_working_sample: leave-one-out pools, skips, serial reference") {
  auto d = panel(4, 16, 22, 2.0, 5, 0.02);
  d.individuals[2].sessions.resize(11);
  const auto lib = small_library();
  PoslSettings st;
  const auto run = run_working_sample(d, lib, st, 3);
  for (const auto& r : run.records) CHECK(r.individual_id != d.individuals[2].id);
  CHECK(std::any_of(run.log.begin(), run.log.end(), [&](const std::string& l) {
    return l.find(d.individuals[2].id + ": skipped") != std::string::npos;
  }));

  // each individual equals a model built on the other individuals only
  for (const auto& ind : d.individuals) {
    const auto pool = without(d, ind.id);
    const auto model = make_model(pool, lib, st, 3);
    CHECK(model.pool_ids.size() == 3);
    CHECK(std::find(model.pool_ids.begin(), model.pool_ids.end(), ind.id) == model.pool_ids.end());
    const auto alone = run_individual(model, ind);
    std::vector<const PredictionRecord*> mine;
    for (const auto& r : run.records)
      if (r.individual_id == ind.id) mine.push_back(&r);
    REQUIRE(mine.size() == alone.records.size());
    for (std::size_t k = 0; k < mine.size(); ++k) check_same_prediction(*mine[k], alone.records[k]);
  }

  st.execution = Execution::serial;
  const auto serial = run_working_sample(d, lib, st, 3);
  REQUIRE(serial.records.size() == run.records.size());
  for (std::size_t k = 0; k < run.records.size(); ++k) check_same_prediction(serial.records[k], run.records[k]);
  CHECK(serial.log == run.log);
}

TEST_CASE("run_working_sample: three individuals give pools of two") {
  const auto d = panel(3, 14, 14, 1.0, 6);
  const auto run = run_working_sample(d, small_library(), PoslSettings{}, 1);
  CHECK(run.records.size() == 9);
  CHECK_THROWS(run_working_sample(panel(1, 14, 14, 1.0), small_library(), PoslSettings{}, 1));
}

TEST_CASE("binary mode: bounds and flags") {
  auto d = panel(4, 20, 24, 3.0, 8, 0.05);
  PoslSettings st;
  st.mode = OutcomeMode::binary;
  st.sl.loss_kind = LossKind::negative_log_likelihood;
  const auto lib = make_library({spec(Family::mean), spec(Family::linear)}, {spec(Family::mean), spec(Family::linear)},
                                OutcomeMode::binary);
  const auto run = run_working_sample(d, lib, st, 1);
  REQUIRE_FALSE(run.records.empty());
  for (const auto& r : run.records) {
    REQUIRE(r.observed.has_value());
    CHECK((*r.observed == 0.0 || *r.observed == 1.0));
    for (const auto* f : {&r.dsl, &r.esl_convex, &r.esl_nonconvex}) {
      CHECK(f->value >= 0.0);
      CHECK(f->value <= 1.0);
      CHECK(f->truncated == (f->raw > 1.0 || f->raw < 0.0));
    }
  }
}

TEST_CASE("tuning: penalty-free optimum on noiseless data") {
  const auto d = panel(12, 20, 20, 0.0, 9, 0.0, 0.0);
  PoslSettings st;
  const auto r = tune_hyperparameters(d, {{Family::ridge, {{{"lambda", 0.0}}, {{"lambda", 1.0}}}},
                                          {Family::lasso, {{{"lambda", 0.0}}, {{"lambda", 0.1}}}}},
                                      st, 1);
  CHECK(r.n_folds == 10);
  CHECK(r.warnings.empty());
  CHECK(r.find(Family::ridge)->best.at("lambda") == 0.0);
  CHECK(r.find(Family::lasso)->best.at("lambda") == 0.0);

  // lasso with lambda 0 collapses to the linear model
  std::vector<LearnerSpec> specs{spec(Family::lasso)};
  apply_tuning(specs, r);
  const auto fb = compute_fallbacks(d);
  const auto ps = prepare_series(d.schema, d.individuals[0], fb, st.features, st.mode, st.threshold);
  const auto l = predict(fit(specs[0], ps.design, ps.targets), ps.design);
  const auto o = predict(fit(spec(Family::linear), ps.design, ps.targets), ps.design);
  CHECK((l - o).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("tuning: singleton grid, fewer than 10 individuals, ties go to the simpler model") {
  const auto d = panel(4, 20, 20, 1.0, 10);
  const auto r = tune_hyperparameters(d, {{Family::ridge, {{{"lambda", 0.3}}}}}, PoslSettings{}, 1);
  CHECK(r.n_folds == 4);
  CHECK(r.warnings.size() == 1);
  CHECK(r.find(Family::ridge)->best.at("lambda") == 0.3);
  CHECK(std::isfinite(r.find(Family::ridge)->best_loss));
  const auto back = tune_result_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back.find(Family::ridge)->best_loss == r.find(Family::ridge)->best_loss);

  const auto m = tune_hyperparameters(d, {{Family::mean, {{}}}}, PoslSettings{}, 1);
  CHECK(m.find(Family::mean)->best.empty());
  CHECK(simpler(Family::ridge, {{"lambda", 2}}, {{"lambda", 1}}));
  CHECK(simpler(Family::gbt, {{"rounds", 10}, {"max_depth", 5}}, {{"rounds", 20}, {"max_depth", 1}}));
  CHECK_THROWS(tune_hyperparameters(d, {}, PoslSettings{}, 1));
}
