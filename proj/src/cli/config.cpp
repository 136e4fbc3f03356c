#include <set>

#include "posl/cli.hpp"
#include "posl/error.hpp"
#include "posl/text.hpp"

namespace posl::cli {

using nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
}

const ordered_json& require(const ordered_json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(std::string("missing mandatory key '") + key + "'");
  return obj.at(key);
}

template <class T>
T get(const ordered_json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + what + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::vector<LearnerSpec> parse_specs(const ordered_json& list, const std::string& where, Scope scope,
                                     OutcomeMode mode) {
  if (!list.is_array()) throw ConfigError(where + " must be an array");
  std::vector<LearnerSpec> out;
  for (const auto& d : list) {
    check_keys(d, where + "[]", {"family", "screened", "hyperparameters", "cv_schemes"});
    LearnerSpec s;
    s.family = parse_family(get<std::string>(require(d, "family"), where + ".family"));
    s.screened = d.contains("screened") && get<bool>(d.at("screened"), where + ".screened");
    if (d.contains("hyperparameters"))
      for (const auto& [k, v] : d.at("hyperparameters").items()) s.hyper[k] = get<double>(v, where + "." + k);
    s.scope = scope;
    s.outcome_mode = mode;
    std::vector<std::string> schemes{"rocv", "rwcv"};
    if (d.contains("cv_schemes")) {
      if (scope == Scope::historical) throw ConfigError(where + ": cv_schemes apply to individual learners only");
      schemes = get<std::vector<std::string>>(d.at("cv_schemes"), where + ".cv_schemes");
      if (schemes.empty()) throw ConfigError(where + ": cv_schemes is empty");
    }
    if (scope == Scope::historical) {
      s.validate();
      out.push_back(s);
      continue;
    }
    for (const auto& name : schemes) {
      s.cv_scheme = parse_cv_scheme(name);
      s.validate();
      out.push_back(s);
    }
  }
  return out;
}

/// {"family": {"key": [values...]}} expanded to the cartesian product.
std::vector<TuneGrid> parse_grid(const ordered_json& grid) {
  if (!grid.is_object()) throw ConfigError("tuning.grid must be an object");
  std::vector<TuneGrid> out;
  for (const auto& [fam, keys] : grid.items()) {
    TuneGrid g;
    g.family = parse_family(fam);
    g.points.push_back({});
    if (!keys.is_object()) throw ConfigError("tuning.grid." + fam + " must be an object");
    for (const auto& [key, values] : keys.items()) {
      const auto vs = get<std::vector<double>>(values, "tuning.grid." + fam + "." + key);
      if (vs.empty()) throw ConfigError("tuning.grid." + fam + "." + key + " is empty");
      std::vector<Hyperparameters> next;
      for (const auto& p : g.points)
        for (double v : vs) {
          auto q = p;
          q[key] = v;
          next.push_back(q);
        }
      g.points = std::move(next);
    }
    for (const auto& p : g.points) {
      LearnerSpec s;
      s.family = g.family;
      s.hyper = p;
      s.validate();
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

std::string RunConfig::hash() const {
  ordered_json d = document;
  if (d.is_object()) d.erase("paths");
  return text::hex64(text::fnv1a(d.dump()));
}

std::string RunConfig::header_comments(const std::string& title) const {
  std::string s = "# " + title + "\n";
  s += "# config_hash=" + hash() + "\n";
  s += "# seeds=simulation:" + std::to_string(seeds.simulation) + ",split:" + std::to_string(seeds.split) +
       ",learner:" + std::to_string(seeds.learner) + ",tuning:" + std::to_string(seeds.tuning) + "\n";
  s += std::string("# mode=") + to_string(settings.mode) + "\n";
  return s;
}

RunConfig parse_config(const ordered_json& input, const fs::path& base_dir, const Overrides& overrides) {
  ordered_json doc = input;
  check_keys(doc, "",
             {"paths", "mode", "threshold", "bounds", "delta", "recency_window", "inner_initial_size", "rwcv_window",
              "first_prediction", "library", "tuning_fraction", "seeds", "features", "shared_pool", "parallel",
              "simulation", "tuning", "report"});
  for (const char* key : {"paths", "mode", "threshold", "bounds", "delta", "recency_window", "inner_initial_size",
                          "rwcv_window", "first_prediction", "library", "tuning_fraction", "seeds"})
    require(doc, key);

  if (overrides.seed)
    for (const char* k : {"simulation", "split", "learner", "tuning"}) doc["seeds"][k] = *overrides.seed;
  if (overrides.mode) doc["mode"] = *overrides.mode;
  if (overrides.out) doc["paths"]["output"] = fs::absolute(*overrides.out).lexically_normal().string();

  RunConfig c;
  const auto& paths = doc.at("paths");
  check_keys(paths, "paths", {"input", "schema", "output", "tune"});
  c.output = resolve(base_dir, get<std::string>(require(paths, "output"), "paths.output"));
  auto optional_path = [&](const char* key, const char* fallback) {
    if (paths.contains(key) && !paths.at(key).is_null())
      return resolve(base_dir, get<std::string>(paths.at(key), std::string("paths.") + key));
    return c.output / fallback;
  };
  c.input = optional_path("input", "panel.csv");
  c.schema = optional_path("schema", "panel.schema.json");

  auto& s = c.settings;
  s.mode = parse_outcome_mode(get<std::string>(doc.at("mode"), "mode"));
  s.threshold = get<double>(doc.at("threshold"), "threshold");
  const auto bounds = get<std::vector<double>>(doc.at("bounds"), "bounds");
  if (bounds.size() != 2) throw ConfigError("bounds must be [lo, hi]");
  s.sl.lo = bounds[0];
  s.sl.hi = bounds[1];
  s.sl.delta = get<double>(doc.at("delta"), "delta");
  s.sl.recency_window = get<int>(doc.at("recency_window"), "recency_window");
  s.sl.loss_kind = s.loss();
  s.inner_initial_size = get<int>(doc.at("inner_initial_size"), "inner_initial_size");
  s.rwcv_window = get<int>(doc.at("rwcv_window"), "rwcv_window");
  s.first_prediction = get<int>(doc.at("first_prediction"), "first_prediction");
  s.shared_pool = doc.contains("shared_pool") && get<bool>(doc.at("shared_pool"), "shared_pool");
  s.execution = !doc.contains("parallel") || get<bool>(doc.at("parallel"), "parallel") ? Execution::parallel
                                                                                       : Execution::serial;
  if (doc.contains("features")) {
    const auto& f = doc.at("features");
    check_keys(f, "features", {"outcome_window", "aux_window", "history_covariates", "covariate_lag", "include_position"});
    auto& fc = s.features;
    if (f.contains("outcome_window")) fc.outcome_window = get<int>(f.at("outcome_window"), "features.outcome_window");
    if (f.contains("aux_window")) fc.aux_window = get<int>(f.at("aux_window"), "features.aux_window");
    if (f.contains("history_covariates"))
      fc.history_covariates = get<std::vector<std::string>>(f.at("history_covariates"), "features.history_covariates");
    if (f.contains("covariate_lag")) fc.covariate_lag = get<int>(f.at("covariate_lag"), "features.covariate_lag");
    if (f.contains("include_position")) fc.include_position = get<bool>(f.at("include_position"), "features.include_position");
  }
  s.validate();

  c.tuning_fraction = get<double>(doc.at("tuning_fraction"), "tuning_fraction");
  if (!(c.tuning_fraction > 0.0 && c.tuning_fraction < 1.0)) throw ConfigError("tuning_fraction must lie in (0, 1)");

  const auto& seeds = doc.at("seeds");
  check_keys(seeds, "seeds", {"simulation", "split", "learner", "tuning"});
  for (const char* k : {"simulation", "split", "learner", "tuning"}) require(seeds, k);
  c.seeds.simulation = get<std::uint64_t>(seeds.at("simulation"), "seeds.simulation");
  c.seeds.split = get<std::uint64_t>(seeds.at("split"), "seeds.split");
  c.seeds.learner = get<std::uint64_t>(seeds.at("learner"), "seeds.learner");
  c.seeds.tuning = get<std::uint64_t>(seeds.at("tuning"), "seeds.tuning");

  const auto& lib = doc.at("library");
  check_keys(lib, "library", {"individual", "historical"});
  c.library.individual = parse_specs(require(lib, "individual"), "library.individual", Scope::individual, s.mode);
  c.library.historical = parse_specs(require(lib, "historical"), "library.historical", Scope::historical, s.mode);
  if (c.library.individual.empty() && c.library.historical.empty()) throw ConfigError("library is empty");

  if (doc.contains("simulation")) {
    const auto& sim = doc.at("simulation");
    check_keys(sim, "simulation",
               {"n_individuals", "min_sessions", "max_sessions", "n_predictors", "intercept", "individual_effect_sd",
                "drift_slope", "noise_sd", "missing_rate", "covariate_autocorrelation", "outcome_bounds"});
    auto& sc = c.simulation;
    auto num = [&](const char* k, auto& field) {
      if (sim.contains(k)) field = get<std::decay_t<decltype(field)>>(sim.at(k), std::string("simulation.") + k);
    };
    num("n_individuals", sc.n_individuals);
    num("min_sessions", sc.min_sessions);
    num("max_sessions", sc.max_sessions);
    num("n_predictors", sc.n_predictors);
    num("intercept", sc.intercept);
    num("individual_effect_sd", sc.individual_effect_sd);
    num("drift_slope", sc.drift_slope);
    num("noise_sd", sc.noise_sd);
    num("missing_rate", sc.missing_rate);
    num("covariate_autocorrelation", sc.covariate_autocorrelation);
    if (sim.contains("outcome_bounds")) {
      const auto b = get<std::vector<double>>(sim.at("outcome_bounds"), "simulation.outcome_bounds");
      if (b.size() != 2) throw ConfigError("simulation.outcome_bounds must be [lo, hi]");
      sc.outcome_lo = b[0];
      sc.outcome_hi = b[1];
    }
  }
  c.simulation.seed = c.seeds.simulation;
  try {
    c.simulation.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (doc.contains("tuning")) {
    const auto& t = doc.at("tuning");
    check_keys(t, "tuning", {"grid"});
    if (t.contains("grid")) c.tuning_grid = parse_grid(t.at("grid"));
  }

  if (doc.contains("report")) {
    const auto& r = doc.at("report");
    check_keys(r, "report", {"calibration_method", "calibration_resolution", "calibration_span", "net_benefit_weight",
                             "decision_thresholds", "profile_span"});
    auto& ro = c.report;
    if (r.contains("calibration_method"))
      ro.calibration_method = parse_curve_method(get<std::string>(r.at("calibration_method"), "report.calibration_method"));
    if (r.contains("calibration_resolution"))
      ro.calibration_resolution = get<int>(r.at("calibration_resolution"), "report.calibration_resolution");
    if (r.contains("calibration_span")) ro.calibration_span = get<double>(r.at("calibration_span"), "report.calibration_span");
    if (r.contains("net_benefit_weight"))
      ro.net_benefit_weight = parse_net_benefit_weight(get<std::string>(r.at("net_benefit_weight"), "report.net_benefit_weight"));
    if (r.contains("decision_thresholds"))
      ro.decision_thresholds = get<std::vector<double>>(r.at("decision_thresholds"), "report.decision_thresholds");
    if (r.contains("profile_span")) ro.profile_span = get<double>(r.at("profile_span"), "report.profile_span");
    if (ro.calibration_resolution < 1) throw ConfigError("report.calibration_resolution must be >= 1");
    if (!(ro.calibration_span > 0.0 && ro.calibration_span <= 1.0)) throw ConfigError("report.calibration_span must lie in (0, 1]");
    if (!(ro.profile_span >= 0.0 && ro.profile_span <= 1.0)) throw ConfigError("report.profile_span must lie in [0, 1]");
    if (ro.net_benefit_weight == NetBenefitWeight::threshold_odds && s.mode != OutcomeMode::binary)
      throw ConfigError("threshold_odds net benefit needs binary mode");
  }
  c.document = std::move(doc);
  return c;
}

RunConfig load_config(const fs::path& path, const Overrides& overrides) {
  const std::string text = text::read_file(path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path(), overrides);
}

}  // namespace posl::cli
