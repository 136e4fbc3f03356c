#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <map>

#include "posl/cv.hpp"
#include "posl/engine.hpp"
#include "posl/error.hpp"

namespace posl {

LossKind PoslSettings::loss() const {
  return mode == OutcomeMode::binary ? LossKind::negative_log_likelihood : LossKind::squared;
}
double PoslSettings::lo() const { return mode == OutcomeMode::binary ? 0.0 : sl.lo; }
double PoslSettings::hi() const { return mode == OutcomeMode::binary ? 1.0 : sl.hi; }

void PoslSettings::validate() const {
  sl.validate();
  if (inner_initial_size < 1) throw ConfigError("inner_initial_size must be >= 1");
  if (rwcv_window < 1) throw ConfigError("rwcv_window must be >= 1");
  if (first_prediction < inner_initial_size + 2)
    throw ConfigError("first_prediction must be >= inner_initial_size + 2");
  if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
  if (features.outcome_window < 1 || features.aux_window < 1 || features.covariate_lag < 0)
    throw ConfigError("feature windows must be >= 1 and covariate_lag >= 0");
}

Library make_library(const std::vector<LearnerSpec>& individual, const std::vector<LearnerSpec>& historical,
                     OutcomeMode mode) {
  Library lib;
  for (auto s : individual) {
    s.scope = Scope::individual;
    s.outcome_mode = mode;
    for (CvScheme scheme : {CvScheme::rocv, CvScheme::rwcv}) {
      s.cv_scheme = scheme;
      lib.individual.push_back(s);
    }
  }
  for (auto s : historical) {
    s.scope = Scope::historical;
    s.outcome_mode = mode;
    s.cv_scheme = CvScheme::rocv;
    lib.historical.push_back(s);
  }
  return lib;
}

std::vector<std::string> PoslModel::learner_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : individual) ids.push_back(s.id());
  for (const auto& f : historical) ids.push_back(f.spec.id());
  return ids;
}

namespace {

using ScreenKey = std::array<double, 6>;

ScreenKey screen_key(const LearnerSpec& s) {
  return {s.param("screen_k"), s.param("rf_trees"), s.param("rf_min_leaf"),
          s.param("rf_mtry"),  s.param("rf_permutation"), s.param("seed")};
}

/// Screening reports shared by the screened specs fitted on the same rows.
class ScreeningCache {
 public:
  const ScreeningReport* get(const LearnerSpec& spec, int first, int last,
                             const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const double> y) {
    if (!spec.screened) return nullptr;
    const auto key = std::make_tuple(first, last, screen_key(spec));
    auto it = reports_.find(key);
    if (it == reports_.end()) it = reports_.emplace(key, screen_for(spec, x, y)).first;
    return &it->second;
  }
  void clear() { reports_.clear(); }

 private:
  std::map<std::tuple<int, int, ScreenKey>, ScreeningReport> reports_;
};

PreparedSeries prepare(const PoslModel& m, const IndividualSeries& series) {
  return prepare_series(m.schema, series, m.fallbacks, m.settings.features, m.settings.mode,
                        m.settings.threshold);
}

/// Fits on positions first..last and predicts position `target`; NaN when the
/// fit does not converge or the prediction is not finite.
double fit_predict(const LearnerSpec& spec, const PreparedSeries& p, int first, int last, int target,
                   ScreeningCache& cache) {
  const auto len = static_cast<Eigen::Index>(last - first + 1);
  const auto x = p.design.middleRows(first - 1, len);
  const std::span<const double> y(p.targets.data() + (first - 1), static_cast<std::size_t>(len));
  const auto* report = cache.get(spec, first, last, x, y);
  const FittedLearner f = fit(spec, x, y, {}, report);
  if (!f.converged) return std::numeric_limits<double>::quiet_NaN();
  const double v = predict(f, p.design.middleRows(target - 1, 1))(0);
  return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
}

/// Training range of an individual learner for validated position v.
std::pair<int, int> train_range(const LearnerSpec& spec, const PoslSettings& s, int v) {
  if (spec.cv_scheme == CvScheme::rwcv) return {std::max(1, v - s.rwcv_window), v - 1};
  return {1, v - 1};
}

void fill_historical(const PoslModel& m, const PreparedSeries& p, Eigen::MatrixXd& table) {
  const auto rows = table.rows();
  for (std::size_t h = 0; h < m.historical.size(); ++h)
    table.col(static_cast<Eigen::Index>(m.individual.size() + h)) =
        predict(m.historical[h], p.design.topRows(rows));
}

/// Meta dataset over positions initial+1..tau and the combination for tau+1.
/// `table` row v-1 holds the out-of-fold predictions for position v.
PredictionRecord assemble(const PoslModel& m, const PreparedSeries& p, const Eigen::MatrixXd& table, int tau) {
  const auto& s = m.settings;
  const auto C = static_cast<Eigen::Index>(m.n_candidates());
  const auto ids = m.learner_ids();

  PredictionRecord rec;
  rec.individual_id = p.id;
  rec.position = tau + 1;
  rec.session_index = p.session_indices[static_cast<std::size_t>(tau)];
  rec.observed = p.targets[static_cast<std::size_t>(tau)];
  rec.observed_raw = p.raw_outcomes[static_cast<std::size_t>(tau)];

  std::vector<int> kept;
  for (int v = s.inner_initial_size + 1; v <= tau; ++v) {
    if (table.row(v - 1).allFinite())
      kept.push_back(v);
    else
      rec.dropped_folds.push_back(v);
  }
  std::vector<Eigen::Index> eligible;
  for (Eigen::Index c = 0; c < C; ++c)
    if (std::isfinite(table(tau, c))) eligible.push_back(c);
  if (kept.empty()) throw Error(ErrorCategory::runtime, p.id + ": insufficient usable folds");
  if (eligible.empty()) throw Error(ErrorCategory::runtime, p.id + ": no candidate converged");

  MetaDataset meta;
  meta.predictions.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(eligible.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    for (std::size_t k = 0; k < eligible.size(); ++k)
      meta.predictions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = table(kept[r] - 1, eligible[k]);
    meta.observed.push_back(p.targets[static_cast<std::size_t>(kept[r] - 1)]);
  }
  meta.session_indices = kept;
  meta.time_weights = time_weights(tau, kept, s.sl.delta, s.sl.recency_window);
  for (auto c : eligible) meta.learner_ids.push_back(ids[static_cast<std::size_t>(c)]);
  meta.dropped_folds = rec.dropped_folds;
  rec.n_meta_rows = static_cast<int>(kept.size());

  const int choice = dsl_select(meta, s.loss());
  const AlphaWeights nonconvex = solve_nnls(meta, false);
  const AlphaWeights convex = convexify(nonconvex);

  std::vector<double> next;
  for (auto c : eligible) next.push_back(table(tau, c));
  auto final_of = [](const Combination& c) { return FinalPrediction{c.value, c.raw, c.truncated}; };
  rec.dsl = final_of(combine_and_truncate(next, choice, s.lo(), s.hi()));
  rec.esl_convex = final_of(combine_and_truncate(next, convex, s.lo(), s.hi()));
  rec.esl_nonconvex = final_of(combine_and_truncate(next, nonconvex, s.lo(), s.hi()));

  rec.candidate_predictions.assign(static_cast<std::size_t>(C), std::numeric_limits<double>::quiet_NaN());
  rec.alpha_convex.alpha.assign(static_cast<std::size_t>(C), 0.0);
  rec.alpha_nonconvex.alpha.assign(static_cast<std::size_t>(C), 0.0);
  rec.alpha_convex.convexified = true;
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    const auto c = static_cast<std::size_t>(eligible[k]);
    rec.candidate_predictions[c] = next[k];
    rec.alpha_convex.alpha[c] = convex.alpha[k];
    rec.alpha_nonconvex.alpha[c] = nonconvex.alpha[k];
  }
  rec.dsl_choice = static_cast<int>(eligible[static_cast<std::size_t>(choice)]);
  rec.dsl_choice_id = ids[static_cast<std::size_t>(rec.dsl_choice)];
  rec.candidate_ids = ids;
  return rec;
}

std::vector<PreparedSeries> prepare_pool(const PanelDataset& pool, const Fallbacks& fb, const PoslSettings& s) {
  std::vector<PreparedSeries> out;
  for (const auto& ind : pool.individuals) {
    auto p = prepare_series(pool.schema, ind, fb, s.features, s.mode, s.threshold);
    if (p.length() > 0) out.push_back(std::move(p));
  }
  return out;
}

/// Re-indexes a record onto `ids`; learners a pool excluded get NaN and 0 weight.
PredictionRecord align(PredictionRecord r, const std::vector<std::string>& ids) {
  if (r.candidate_ids == ids) return r;
  const auto n = ids.size();
  std::vector<double> pred(n, std::numeric_limits<double>::quiet_NaN()), ac(n, 0.0), an(n, 0.0);
  const int choice = r.dsl_choice;
  for (std::size_t k = 0; k < r.candidate_ids.size(); ++k) {
    const auto it = std::find(ids.begin(), ids.end(), r.candidate_ids[k]);
    if (it == ids.end()) throw Error(ErrorCategory::runtime, "unknown learner id " + r.candidate_ids[k]);
    const auto j = static_cast<std::size_t>(it - ids.begin());
    pred[j] = r.candidate_predictions[k];
    ac[j] = r.alpha_convex.alpha[k];
    an[j] = r.alpha_nonconvex.alpha[k];
    if (static_cast<int>(k) == choice) r.dsl_choice = static_cast<int>(j);
  }
  r.candidate_predictions = std::move(pred);
  r.alpha_convex.alpha = std::move(ac);
  r.alpha_nonconvex.alpha = std::move(an);
  r.candidate_ids = ids;
  return r;
}

}  // namespace

HistoricalFit fit_historical(const PanelDataset& pool, const std::vector<LearnerSpec>& specs,
                             const PoslSettings& settings, std::uint64_t seed) {
  if (pool.individuals.empty()) throw ArgumentError("historical pool is empty");
  HistoricalFit out;
  if (specs.empty()) return out;
  const Fallbacks fb = compute_fallbacks(pool);
  const PooledRows rows = pool_rows(prepare_pool(pool, fb, settings));
  if (rows.targets.empty()) throw DataError("historical pool has no usable sessions");
  const int last = static_cast<int>(rows.targets.size());
  ScreeningCache cache;
  for (auto spec : specs) {
    spec.scope = Scope::historical;
    spec.outcome_mode = settings.mode;
    if (spec.screened && !spec.hyper.count("seed")) spec.hyper["seed"] = static_cast<double>(seed);
    const auto* report = cache.get(spec, 1, last, rows.design, rows.targets);
    FittedLearner f = fit(spec, rows.design, rows.targets, {}, report);
    if (f.converged)
      out.fitted.push_back(std::move(f));
    else
      out.warnings.push_back("warning: " + spec.id() + " did not converge on the historical pool; excluded");
  }
  if (out.fitted.empty()) throw Error(ErrorCategory::runtime, "no historical learner converged");
  return out;
}

PoslModel make_model(const PanelDataset& pool, const Library& library, const PoslSettings& settings,
                     std::uint64_t seed) {
  settings.validate();
  PoslModel m;
  m.schema = pool.schema;
  m.settings = settings;
  m.fallbacks = compute_fallbacks(pool);
  for (auto s : library.individual) {
    s.scope = Scope::individual;
    s.outcome_mode = settings.mode;
    if (s.screened && !s.hyper.count("seed")) s.hyper["seed"] = static_cast<double>(seed);
    s.validate();
    m.individual.push_back(s);
  }
  for (const auto& ind : pool.individuals) m.pool_ids.push_back(ind.id);
  if (!library.historical.empty()) {
    auto h = fit_historical(pool, library.historical, settings, seed);
    m.historical = std::move(h.fitted);
    m.warnings = std::move(h.warnings);
  }
  if (m.n_candidates() == 0) throw ConfigError("empty learner library");
  auto ids = m.learner_ids();
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ConfigError("learner ids must be unique: " + *std::adjacent_find(ids.begin(), ids.end()));
  return m;
}

PredictionRecord posl_predict_next(const PoslModel& model, const IndividualSeries& series, int tau) {
  const auto& s = model.settings;
  const PreparedSeries p = prepare(model, series);
  if (tau < s.inner_initial_size + 1) throw ArgumentError("tau must be >= inner_initial_size + 1");
  if (tau + 1 > p.length()) throw ArgumentError(p.id + ": no session after tau");

  Eigen::MatrixXd table = Eigen::MatrixXd::Constant(tau + 1, static_cast<Eigen::Index>(model.n_candidates()),
                                                    std::numeric_limits<double>::quiet_NaN());
  const FoldPlan rocv = make_rocv(tau, s.inner_initial_size);
  const FoldPlan rwcv = make_rwcv_aligned(tau, s.inner_initial_size, s.rwcv_window);
  ScreeningCache cache;
  for (std::size_t c = 0; c < model.individual.size(); ++c) {
    const auto& spec = model.individual[c];
    const auto& plan = spec.cv_scheme == CvScheme::rwcv ? rwcv : rocv;
    const auto col = static_cast<Eigen::Index>(c);
    for (const auto& fold : plan.folds) {
      const int v = fold.validate.front();
      table(v - 1, col) = fit_predict(spec, p, fold.train.front(), fold.train.back(), v, cache);
    }
    // Final refit: full prefix, or the trailing window for sliding-window learners.
    const int first = spec.cv_scheme == CvScheme::rwcv ? std::max(1, tau + 1 - s.rwcv_window) : 1;
    table(tau, col) = fit_predict(spec, p, first, tau, tau + 1, cache);
  }
  fill_historical(model, p, table);
  return assemble(model, p, table, tau);
}

IndividualRun run_individual(const PoslModel& model, const IndividualSeries& series) {
  const auto& s = model.settings;
  IndividualRun run;
  const PreparedSeries p = prepare(model, series);
  const int T = p.length();
  if (T < s.first_prediction) {
    run.skipped = true;
    run.log.push_back(series.id + ": skipped: series too short (" + std::to_string(T) + " usable sessions < " +
                      std::to_string(s.first_prediction) + ")");
    return run;
  }

  Eigen::MatrixXd table = Eigen::MatrixXd::Constant(T, static_cast<Eigen::Index>(model.n_candidates()),
                                                    std::numeric_limits<double>::quiet_NaN());
  ScreeningCache cache;
  for (int v = s.inner_initial_size + 1; v <= T; ++v) {
    for (std::size_t c = 0; c < model.individual.size(); ++c) {
      const auto [first, last] = train_range(model.individual[c], s, v);
      table(v - 1, static_cast<Eigen::Index>(c)) = fit_predict(model.individual[c], p, first, last, v, cache);
    }
    cache.clear();
  }
  fill_historical(model, p, table);

  std::vector<int> logged;
  for (int tau = s.first_prediction - 1; tau < T; ++tau) {
    try {
      run.records.push_back(assemble(model, p, table, tau));
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::runtime) throw;
      run.log.push_back(series.id + ": session " + std::to_string(p.session_indices[static_cast<std::size_t>(tau)]) +
                        ": no prediction: " + e.what());
      continue;
    }
    for (int v : run.records.back().dropped_folds)
      if (std::find(logged.begin(), logged.end(), v) == logged.end()) {
        logged.push_back(v);
        run.log.push_back(series.id + ": fold validating session " +
                          std::to_string(p.session_indices[static_cast<std::size_t>(v - 1)]) +
                          " disregarded: a candidate learner did not converge");
      }
  }
  return run;
}

WorkingRun run_working_sample(const PanelDataset& working, const Library& library, const PoslSettings& settings,
                              std::uint64_t seed) {
  const std::size_t n = working.individuals.size();
  if (n < 2) throw ArgumentError("need at least 2 working individuals");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return working.individuals[a].id < working.individuals[b].id; });

  std::optional<PoslModel> shared;
  if (settings.shared_pool) shared = make_model(working, library, settings, seed);

  struct Slot {
    IndividualRun run;
    std::vector<std::string> warnings;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(n);
  auto job = [&](std::size_t k) {
    const auto& ind = working.individuals[order[k]];
    try {
      if (shared) {
        slots[k].run = run_individual(*shared, ind);
        return;
      }
      PanelDataset pool;
      pool.schema = working.schema;
      for (const auto& other : working.individuals)
        if (other.id != ind.id) pool.individuals.push_back(other);
      const PoslModel model = make_model(pool, library, settings, seed);
      for (const auto& w : model.warnings) slots[k].warnings.push_back(ind.id + " pool: " + w);
      slots[k].run = run_individual(model, ind);
    } catch (...) {
      slots[k].error = std::current_exception();
    }
  };
  const auto count = static_cast<long>(n);
  if (settings.execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < count; ++k) job(static_cast<std::size_t>(k));
  } else {
    for (long k = 0; k < count; ++k) job(static_cast<std::size_t>(k));
  }

  WorkingRun out;
  for (auto spec : library.individual) {
    spec.scope = Scope::individual;
    out.learner_ids.push_back(spec.id());
  }
  for (auto spec : library.historical) {
    spec.scope = Scope::historical;
    out.learner_ids.push_back(spec.id());
  }
  if (shared) out.log = shared->warnings;
  for (auto& slot : slots) {
    if (slot.error) std::rethrow_exception(slot.error);
    out.log.insert(out.log.end(), slot.warnings.begin(), slot.warnings.end());
    out.log.insert(out.log.end(), slot.run.log.begin(), slot.run.log.end());
    for (auto& r : slot.run.records) out.records.push_back(align(std::move(r), out.learner_ids));
  }
  return out;
}

}  // namespace posl
