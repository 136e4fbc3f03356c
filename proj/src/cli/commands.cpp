#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "posl/cli.hpp"
#include "posl/error.hpp"
#include "posl/text.hpp"

namespace posl::cli {

using nlohmann::ordered_json;

namespace {

ordered_json provenance(const RunConfig& c) {
  return {{"config_hash", c.hash()},
          {"seeds",
           {{"simulation", c.seeds.simulation},
            {"split", c.seeds.split},
            {"learner", c.seeds.learner},
            {"tuning", c.seeds.tuning}}}};
}

void write_json(const fs::path& path, const ordered_json& doc) { text::write_file_atomic(path, doc.dump(2) + "\n"); }

PanelDataset load_input(const RunConfig& c) {
  if (!fs::exists(c.input)) throw IoError("input not found: " + c.input.string());
  if (!fs::exists(c.schema)) throw IoError("schema sidecar not found: " + c.schema.string());
  return load_panel_csv(c.input, load_schema_sidecar(c.schema));
}

std::pair<PanelDataset, PanelDataset> split(const RunConfig& c, const PanelDataset& panel) {
  return split_tuning_working(panel, c.tuning_fraction, c.seeds.split);
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json metrics_json(const IndividualMetrics& m) {
  ordered_json j;
  j["individual_id"] = m.individual_id;
  j["n"] = m.n;
  j["mdae"] = m.mdae;
  j["mse"] = m.mse;
  j["calib_intercept"] = m.calib_intercept;
  j["calib_slope"] = opt_json(m.calib_slope);
  j["auroc"] = opt_json(m.auroc);
  if (!m.auroc) j["auroc_reason"] = m.auroc_reason;
  return j;
}

std::vector<double> default_thresholds(OutcomeMode mode) {
  std::vector<double> t;
  if (mode == OutcomeMode::binary)
    for (int k = 1; k <= 19; ++k) t.push_back(0.05 * k);
  else
    for (int k = 15; k <= 35; ++k) t.push_back(k);
  return t;
}

}  // namespace

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::data: return 4;
    case ErrorCategory::invalid_argument: return 5;
    case ErrorCategory::runtime: return 6;
  }
  return 6;
}

int simulate_cmd(const RunConfig& config, std::ostream& out) {
  const PanelDataset panel = simulate_panel(config.simulation);
  fs::create_directories(config.input.parent_path());
  fs::create_directories(config.schema.parent_path());
  text::write_file_atomic(config.input, config.header_comments("panel") + format_panel_csv(panel));
  ordered_json cols = ordered_json::object();
  for (const auto& c : panel.schema.columns) {
    ordered_json e;
    e["kind"] = to_string(c.kind);
    e["role"] = to_string(c.role);
    if (c.kind == ColumnKind::categorical) e["levels"] = c.levels;
    cols[c.name] = e;
  }
  write_json(config.schema, {{"provenance", provenance(config)}, {"columns", cols}});
  out << "simulate: " << panel.individuals.size() << " individuals, " << panel.n_sessions() << " rows -> "
      << config.input.string() << "\n";
  return 0;
}

int tune_cmd(const RunConfig& config, std::ostream& out) {
  if (config.tuning_grid.empty()) throw ConfigError("tuning grid is empty");
  const auto [tuning, working] = split(config, load_input(config));
  const TuneResult result = tune_hyperparameters(tuning, config.tuning_grid, config.settings, config.seeds.tuning);
  for (const auto& w : result.warnings) out << w << "\n";
  ordered_json doc = provenance(config);
  doc["tune"] = ordered_json::parse(to_json(result).dump());
  fs::create_directories(config.output);
  write_json(config.output / "tune.json", doc);
  for (const auto& t : result.families) {
    out << "tune: " << to_string(t.family);
    for (const auto& [k, v] : t.best) out << " " << k << "=" << text::format_real(v);
    out << " cv_loss=" << text::format_real(t.best_loss) << "\n";
  }
  return 0;
}

int run_cmd(const RunConfig& config, std::ostream& out) {
  const auto [tuning, working] = split(config, load_input(config));
  Library library = config.library;
  const fs::path tune_path = config.output / "tune.json";
  if (fs::exists(tune_path)) {
    ordered_json doc;
    try {
      doc = ordered_json::parse(text::read_file(tune_path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(tune_path.string() + ": " + e.what());
    }
    if (doc.value("config_hash", std::string()) != config.hash())
      out << "warning: " << tune_path.string() << " was produced by a different config\n";
    if (!doc.contains("tune")) throw DataError(tune_path.string() + ": missing tune result");
    const TuneResult tuned = tune_result_from_json(nlohmann::json::parse(doc["tune"].dump()));
    apply_tuning(library.individual, tuned);
    apply_tuning(library.historical, tuned);
  } else {
    out << "warning: no tune result at " << tune_path.string() << "; using default hyperparameters\n";
  }

  const WorkingRun run = run_working_sample(working, library, config.settings, config.seeds.learner);
  fs::create_directories(config.output);
  text::write_file_atomic(config.output / "predictions.csv", format_predictions_csv(run, config));
  text::write_file_atomic(config.output / "weights.csv", format_weights_csv(run, config));
  std::string log = config.header_comments("skips");
  for (const auto& line : run.log) log += line + "\n";
  text::write_file_atomic(config.output / "skips.log", log);
  ordered_json echo = config.document;
  echo.erase("paths");
  ordered_json meta = provenance(config);
  meta["config"] = echo;
  write_json(config.output / "run_config.json", meta);

  std::size_t individuals = 0;
  for (std::size_t k = 0; k < run.records.size(); ++k)
    if (k == 0 || run.records[k].individual_id != run.records[k - 1].individual_id) ++individuals;
  out << "run: " << run.records.size() << " predictions for " << individuals << " individuals, "
      << run.learner_ids.size() << " candidates\n";
  return 0;
}

int report_cmd(const RunConfig& config, const std::optional<fs::path>& predictions, std::ostream& out) {
  const fs::path path = predictions ? *predictions : config.output / "predictions.csv";
  if (!fs::exists(path)) throw IoError("predictions not found: " + path.string());
  const PredictionTable table = parse_predictions_csv(text::read_file(path), path.string());
  if (table.records.empty()) throw DataError(path.string() + ": no prediction rows");
  const auto& s = config.settings;
  const ReportOptions& ro = config.report;
  const auto thresholds = ro.decision_thresholds.empty() ? default_thresholds(s.mode) : ro.decision_thresholds;

  ordered_json doc = provenance(config);
  doc["mode"] = to_string(s.mode);
  doc["threshold"] = s.threshold;
  doc["selectors"] = ordered_json::array();
  std::string calib = config.header_comments("calibration_curve") + "selector,method,predicted,observed\n";
  std::string decision = config.header_comments("decision_curve") + "selector,threshold,prevalence,net_benefit,treat_all\n";
  std::string profiles = config.header_comments("time_profiles") + "selector,metric,time,value\n";

  for (const auto& sel : all_selectors(table.learner_ids)) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_id;
    std::vector<double> obs, pred;
    for (const auto& r : table.records) {
      const double v = selected_value(r, sel);
      if (!r.observed || !std::isfinite(v)) continue;
      auto [it, fresh] = by_id.try_emplace(r.individual_id);
      if (fresh) order.push_back(r.individual_id);
      it->second.first.push_back(*r.observed);
      it->second.second.push_back(v);
      obs.push_back(*r.observed);
      pred.push_back(v);
    }
    ordered_json entry;
    entry["name"] = sel.name;
    if (obs.empty()) {
      entry["pooled"] = nullptr;
      entry["individuals"] = ordered_json::array();
      doc["selectors"].push_back(entry);
      continue;
    }
    ordered_json pooled = metrics_json(individual_metrics("pooled", obs, pred, s.mode, s.threshold));
    std::vector<double> labels = obs;
    if (s.mode == OutcomeMode::continuous)
      for (double& l : labels) l = l >= s.threshold ? 1.0 : 0.0;
    const Auroc a = auroc(labels, pred, true);
    pooled["auroc_ci"] = a.ci ? ordered_json::array({a.ci->first, a.ci->second}) : ordered_json(nullptr);
    entry["pooled"] = pooled;
    ordered_json inds = ordered_json::array();
    for (const auto& id : order) {
      const auto& [o, p] = by_id.at(id);
      inds.push_back(metrics_json(individual_metrics(id, o, p, s.mode, s.threshold)));
    }
    entry["individuals"] = inds;
    doc["selectors"].push_back(entry);

    try {
      const auto curve = calibration_curve(obs, pred, ro.calibration_method, ro.calibration_resolution,
                                           ro.calibration_span);
      for (const auto& [x, y] : curve.points)
        calib += sel.name + "," + to_string(ro.calibration_method) + "," + text::format_real(x) + "," +
                 text::format_real(y) + "\n";
    } catch (const ArgumentError& e) {
      out << "warning: " << sel.name << ": " << e.what() << "\n";
    }

    for (double t : thresholds) {
      std::vector<double> lab = labels;
      if (s.mode == OutcomeMode::continuous)
        for (std::size_t k = 0; k < obs.size(); ++k) lab[k] = obs[k] >= t ? 1.0 : 0.0;
      try {
        const double at[1] = {t};
        const auto dc = decision_curve(lab, pred, at, ro.net_benefit_weight);
        decision += sel.name + "," + text::format_real(t) + "," + text::format_real(dc.prevalence) + "," +
                    text::format_real(dc.net_benefit[0]) + "," + text::format_real(dc.treat_all[0]) + "\n";
      } catch (const ArgumentError&) {
        // undefined net benefit at this threshold
      }
    }

    std::vector<PredictionRecord> rows;
    for (const auto& r : table.records)
      if (r.observed && std::isfinite(selected_value(r, sel))) rows.push_back(r);
    for (ProfileMetric m : {ProfileMetric::mdae, ProfileMetric::calib_intercept, ProfileMetric::calib_slope})
      for (const auto& [t, v] : time_profiles(rows, sel, m, ro.profile_span))
        profiles += sel.name + "," + to_string(m) + "," + std::to_string(t) + "," + text::format_real(v) + "\n";
  }

  fs::create_directories(config.output);
  write_json(config.output / "metrics.json", doc);
  text::write_file_atomic(config.output / "calibration_curve.csv", calib);
  text::write_file_atomic(config.output / "decision_curve.csv", decision);
  text::write_file_atomic(config.output / "time_profiles.csv", profiles);
  out << "report: " << table.records.size() << " predictions, " << table.learner_ids.size() + 3 << " selectors\n";
  return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalised online super learner"};
  app.require_subcommand(1);
  std::string config_path, mode, predictions;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config")->required();
    sub->add_option("--seed", seed, "Replace every seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--mode", mode, "continuous or binary");
  };
  auto* simulate = app.add_subcommand("simulate", "Write a simulated panel and its schema");
  auto* tune = app.add_subcommand("tune", "Tune hyperparameters on the tuning sample");
  auto* run = app.add_subcommand("run", "Forward validation on the working sample");
  auto* report = app.add_subcommand("report", "Metrics and curves from predictions.csv");
  for (auto* sub : {simulate, tune, run, report}) add_common(sub);
  report->add_option("--predictions", predictions, "Predictions file (default <out>/predictions.csv)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << to_string(ErrorCategory::config) << ": " << e.what() << "\n";
    return exit_code(ErrorCategory::config);
  }

  try {
    Overrides ov;
    for (auto* sub : {simulate, tune, run, report}) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) ov.seed = seed;
      if (sub->count("--out")) ov.out = out_dir;
      if (sub->count("--mode")) ov.mode = mode;
    }
    const RunConfig config = load_config(config_path, ov);
    if (simulate->parsed()) return simulate_cmd(config, out);
    if (tune->parsed()) return tune_cmd(config, out);
    if (run->parsed()) return run_cmd(config, out);
    std::optional<fs::path> p;
    if (!predictions.empty()) p = fs::path(predictions);
    return report_cmd(config, p, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.category()) << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << to_string(ErrorCategory::io) << ": " << e.what() << "\n";
    return exit_code(ErrorCategory::io);
  } catch (const std::exception& e) {
    err << "error: " << to_string(ErrorCategory::runtime) << ": " << e.what() << "\n";
    return exit_code(ErrorCategory::runtime);
  }
}

}  // namespace posl::cli
