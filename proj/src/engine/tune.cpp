#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "posl/engine.hpp"
#include "posl/error.hpp"

namespace posl {

const FamilyTuning* TuneResult::find(Family f) const {
  for (const auto& t : families)
    if (t.family == f) return &t;
  return nullptr;
}

bool simpler(Family family, const Hyperparameters& a, const Hyperparameters& b) {
  // (key, +1 when larger is simpler, -1 when smaller is simpler)
  std::vector<std::pair<const char*, int>> order;
  switch (family) {
    case Family::ridge:
    case Family::lasso: order = {{"lambda", +1}}; break;
    case Family::hinge_spline: order = {{"max_terms", -1}, {"gcv_penalty", +1}, {"max_knots", -1}}; break;
    case Family::gbt: order = {{"rounds", -1}, {"max_depth", -1}, {"shrinkage", -1}, {"min_leaf", +1}}; break;
    default: break;
  }
  const auto defaults = default_hyperparameters(family);
  auto value = [&](const Hyperparameters& h, const char* key) {
    auto it = h.find(key);
    return it != h.end() ? it->second : defaults.at(key);
  };
  for (const auto& [key, dir] : order) {
    const double va = value(a, key), vb = value(b, key);
    if (va != vb) return dir > 0 ? va > vb : va < vb;
  }
  return false;
}

namespace {

double mean_loss(const Eigen::VectorXd& pred, const std::vector<double>& y, LossKind kind) {
  std::vector<double> p(pred.data(), pred.data() + pred.size());
  std::vector<double> w(y.size(), 1.0);
  return cumulative_weighted_loss(y, p, w, kind);
}

}  // namespace

TuneResult tune_hyperparameters(const PanelDataset& tuning, const std::vector<TuneGrid>& grid,
                                const PoslSettings& settings, std::uint64_t seed) {
  const std::size_t n = tuning.individuals.size();
  if (n < 2) throw ArgumentError("tuning needs at least 2 individuals");
  if (grid.empty()) throw ConfigError("tuning grid is empty");
  for (const auto& g : grid)
    if (g.points.empty()) throw ConfigError(std::string("tuning grid for ") + to_string(g.family) + " is empty");

  TuneResult result;
  result.n_folds = static_cast<int>(std::min<std::size_t>(10, n));
  if (n < 10)
    result.warnings.push_back("warning: " + std::to_string(n) + " tuning individuals; using " +
                              std::to_string(n) + " folds instead of 10");

  std::vector<std::string> ids;
  for (const auto& ind : tuning.individuals) ids.push_back(ind.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::string, int> fold_of;
  for (std::size_t k = 0; k < ids.size(); ++k) fold_of[ids[k]] = static_cast<int>(k % static_cast<std::size_t>(result.n_folds));

  std::vector<std::vector<double>> total(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) total[g].assign(grid[g].points.size(), 0.0);
  double n_rows = 0.0;
  const LossKind kind = settings.loss();

  for (int fold = 0; fold < result.n_folds; ++fold) {
    PanelDataset train, valid;
    train.schema = valid.schema = tuning.schema;
    for (const auto& ind : tuning.individuals) (fold_of[ind.id] == fold ? valid : train).individuals.push_back(ind);
    const Fallbacks fb = compute_fallbacks(train);
    auto pooled = [&](const PanelDataset& d) {
      std::vector<PreparedSeries> ps;
      for (const auto& ind : d.individuals)
        ps.push_back(prepare_series(d.schema, ind, fb, settings.features, settings.mode, settings.threshold));
      return pool_rows(ps);
    };
    const PooledRows tr = pooled(train), va = pooled(valid);
    if (tr.targets.empty()) throw DataError("tuning fold has no training rows");
    if (va.targets.empty()) continue;
    n_rows += static_cast<double>(va.targets.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (std::size_t k = 0; k < grid[g].points.size(); ++k) {
        LearnerSpec spec;
        spec.family = grid[g].family;
        spec.hyper = grid[g].points[k];
        spec.scope = Scope::historical;
        spec.outcome_mode = settings.mode;
        spec.validate();
        const FittedLearner f = fit(spec, tr.design, tr.targets);
        const double loss = f.converged ? mean_loss(predict(f, va.design), va.targets, kind)
                                        : std::numeric_limits<double>::infinity();
        total[g][k] += loss;
      }
    }
  }
  if (!(n_rows > 0.0)) throw DataError("tuning sample has no usable sessions");

  for (std::size_t g = 0; g < grid.size(); ++g) {
    FamilyTuning t;
    t.family = grid[g].family;
    t.points = grid[g].points;
    for (double s : total[g]) t.losses.push_back(s / n_rows);
    std::size_t best = 0;
    for (std::size_t k = 1; k < t.losses.size(); ++k) {
      const double tol = 1e-12 * std::max(1.0, std::abs(t.losses[best]));
      if (t.losses[k] < t.losses[best] - tol ||
          (std::abs(t.losses[k] - t.losses[best]) <= tol && simpler(t.family, t.points[k], t.points[best])))
        best = k;
    }
    t.best = t.points[best];
    t.best_loss = t.losses[best];
    result.families.push_back(std::move(t));
  }
  return result;
}

void apply_tuning(std::vector<LearnerSpec>& specs, const TuneResult& result) {
  for (auto& s : specs)
    if (const auto* t = result.find(s.family))
      for (const auto& [k, v] : t->best) s.hyper[k] = v;
}

nlohmann::json to_json(const TuneResult& r) {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& t : r.families) {
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t k = 0; k < t.points.size(); ++k)
      grid.push_back({{"hyperparameters", t.points[k]}, {"cv_loss", t.losses[k]}});
    fams.push_back({{"family", to_string(t.family)}, {"best", t.best}, {"best_loss", t.best_loss}, {"grid", grid}});
  }
  return nlohmann::json{{"n_folds", r.n_folds}, {"families", fams}, {"warnings", r.warnings}};
}

TuneResult tune_result_from_json(const nlohmann::json& j) {
  try {
    TuneResult r;
    r.n_folds = j.at("n_folds").get<int>();
    r.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& f : j.at("families")) {
      FamilyTuning t;
      t.family = parse_family(f.at("family").get<std::string>());
      t.best = f.at("best").get<Hyperparameters>();
      t.best_loss = f.at("best_loss").get<double>();
      for (const auto& g : f.at("grid")) {
        t.points.push_back(g.at("hyperparameters").get<Hyperparameters>());
        const auto& loss = g.at("cv_loss");  // null for a grid point that never converged
        t.losses.push_back(loss.is_null() ? std::numeric_limits<double>::infinity() : loss.get<double>());
      }
      r.families.push_back(std::move(t));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tune result: ") + e.what());
  }
}

}  // namespace posl
