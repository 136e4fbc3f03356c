#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posl/engine.hpp"
#include "posl/error.hpp"
#include "posl/metrics.hpp"

namespace posl::cli {

namespace fs = std::filesystem;

struct Seeds {
  std::uint64_t simulation = 1;
  std::uint64_t split = 1;
  std::uint64_t learner = 1;
  std::uint64_t tuning = 1;
};

struct ReportOptions {
  CurveMethod calibration_method = CurveMethod::binned;
  int calibration_resolution = 10;
  double calibration_span = 0.3;
  NetBenefitWeight net_benefit_weight = NetBenefitWeight::prevalence_odds;
  std::vector<double> decision_thresholds;  // empty: mode default
  double profile_span = 0.3;
};

/// Effective configuration. Mandatory keys: paths.output, mode, threshold,
/// bounds, delta, recency_window, inner_initial_size, rwcv_window,
/// first_prediction, library, tuning_fraction, seeds.
struct RunConfig {
  fs::path input;   // default <output>/panel.csv
  fs::path schema;  // default <output>/panel.schema.json
  fs::path output;
  PoslSettings settings;
  Library library;
  double tuning_fraction = 0.2;
  Seeds seeds;
  SimulationConfig simulation;
  std::vector<TuneGrid> tuning_grid;
  ReportOptions report;

  /// Effective config as parsed, overrides applied.
  nlohmann::ordered_json document;
  /// FNV-1a of the canonical dump of `document` without its paths.
  std::string hash() const;
  /// "# key=value" provenance lines for output headers.
  std::string header_comments(const std::string& title) const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;  // replaces every seed
  std::optional<fs::path> out;
  std::optional<std::string> mode;
};

RunConfig load_config(const fs::path& path, const Overrides& overrides = {});
RunConfig parse_config(const nlohmann::ordered_json& doc, const fs::path& base_dir, const Overrides& overrides = {});

// Output formats

std::string format_predictions_csv(const WorkingRun& run, const RunConfig& config);
std::string format_weights_csv(const WorkingRun& run, const RunConfig& config);

struct PredictionTable {
  std::vector<std::string> learner_ids;
  std::vector<PredictionRecord> records;
};
PredictionTable parse_predictions_csv(const std::string& text, const std::string& source = "<memory>");

// Commands; each returns the exit status and prints one line per outcome.

int simulate_cmd(const RunConfig& config, std::ostream& out);
int tune_cmd(const RunConfig& config, std::ostream& out);
int run_cmd(const RunConfig& config, std::ostream& out);
int report_cmd(const RunConfig& config, const std::optional<fs::path>& predictions, std::ostream& out);

/// Full command line (argv[0] excluded). Errors are reported on `err` as
/// "error: <category>: <message>" with a nonzero status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code(ErrorCategory c);

}  // namespace posl::cli
