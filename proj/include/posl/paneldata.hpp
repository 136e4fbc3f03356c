#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace posl {

using MaybeReal = std::optional<double>;

enum class ColumnKind { continuous, binary, categorical };
enum class ColumnRole { baseline, session };
enum class OutcomeMode { continuous, binary };

const char* to_string(ColumnKind k);
const char* to_string(ColumnRole r);
const char* to_string(OutcomeMode m);
ColumnKind parse_column_kind(const std::string& s);
ColumnRole parse_column_role(const std::string& s);
OutcomeMode parse_outcome_mode(const std::string& s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::session;
  /// Category codes for categorical columns (one-hot, first level is the reference).
  std::vector<double> levels;
};

/// Covariate columns in file order; the mandatory individual_id, session_index
/// and outcome columns are implicit.
struct Schema {
  std::vector<ColumnSpec> columns;

  std::vector<std::size_t> baseline_columns() const;
  std::vector<std::size_t> session_columns() const;
  const ColumnSpec& baseline(std::size_t j) const { return columns[baseline_columns()[j]]; }
  const ColumnSpec& session(std::size_t j) const { return columns[session_columns()[j]]; }
  std::size_t n_baseline() const { return baseline_columns().size(); }
  std::size_t n_session() const { return session_columns().size(); }
};

struct SessionRecord {
  int session_index = 1;
  MaybeReal outcome;
  /// Aligned with Schema::session_columns().
  std::vector<MaybeReal> covariates;
};

struct IndividualSeries {
  std::string id;
  /// Aligned with Schema::baseline_columns().
  std::vector<MaybeReal> baseline;
  std::vector<SessionRecord> sessions;

  std::size_t length() const { return sessions.size(); }
};

struct PanelDataset {
  Schema schema;
  std::vector<IndividualSeries> individuals;

  /// Throws DataError on any invariant violation.
  void validate() const;
  const IndividualSeries* find(const std::string& id) const;
  std::size_t n_sessions() const;
};

/// Schema sidecar: {"columns": {"name": {"kind": ..., "role": ..., "levels": [...]}}}.
/// Column order is taken from the CSV header.
struct SchemaSidecar {
  struct Entry {
    ColumnKind kind = ColumnKind::continuous;
    ColumnRole role = ColumnRole::session;
    std::vector<double> levels;
  };
  std::vector<std::pair<std::string, Entry>> entries;

  const Entry* find(const std::string& name) const;
};

SchemaSidecar load_schema_sidecar(const std::filesystem::path& path);
void save_schema_sidecar(const Schema& schema, const std::filesystem::path& path);

PanelDataset load_panel_csv(const std::filesystem::path& path, const SchemaSidecar& sidecar);
/// Parses CSV text; `source` names the input in error messages.
PanelDataset parse_panel_csv(const std::string& text, const SchemaSidecar& sidecar,
                             const std::string& source = "<memory>");
std::string format_panel_csv(const PanelDataset& dataset);

// ---------------------------------------------------------------------------
// Features

struct FeatureConfig {
  /// Sessions averaged into the outcome-history column (about three months at
  /// three sessions per week).
  int outcome_window = 36;
  /// Sessions averaged into each auxiliary history column.
  int aux_window = 3;
  /// Session covariates that get an auxiliary rolling-mean column.
  std::vector<std::string> history_covariates;
  /// Session covariates are read from session t - covariate_lag. With the
  /// default of 1 a feature row for t depends only on sessions before t.
  int covariate_lag = 1;
  bool include_position = true;
};

/// Cold-start values used when an individual has no prior observation.
struct Fallbacks {
  std::vector<double> baseline;  // per baseline column
  std::vector<double> session;   // per session column
  double outcome = 0.0;
};

/// Column median (continuous) or mode (binary, categorical; lowest code wins
/// ties) over all non-missing pool values; outcome median for the history.
Fallbacks compute_fallbacks(const PanelDataset& pool);

struct FeatureRow {
  std::vector<double> values;
  /// One per baseline then session source column; 1 iff the source value was
  /// missing before imputation.
  std::vector<std::uint8_t> missing_indicators;
  int session_index = 0;

  /// values followed by the indicators, the row learners consume.
  std::vector<double> design() const;
};

/// Column names of the design row produced by build_features.
std::vector<std::string> feature_names(const Schema& schema, const FeatureConfig& config);
std::size_t feature_arity(const Schema& schema, const FeatureConfig& config);

/// Feature row for position t (1-based) of `series`.
FeatureRow build_features(const Schema& schema, const IndividualSeries& series, int t,
                          const Fallbacks& fallbacks, const FeatureConfig& config = {});

/// A series reduced to the sessions that enter modelling, with its design
/// matrix and targets. Positions are 1-based indices into `sessions`.
struct PreparedSeries {
  std::string id;
  std::vector<int> session_indices;
  Eigen::MatrixXd design;
  std::vector<double> targets;
  std::vector<MaybeReal> raw_outcomes;

  int length() const { return static_cast<int>(targets.size()); }
};

/// Continuous mode drops sessions with a missing outcome; binary mode keeps
/// them with target 0 and maps observed outcomes to 1{y >= threshold}.
IndividualSeries filter_for_mode(const IndividualSeries& series, OutcomeMode mode);
PreparedSeries prepare_series(const Schema& schema, const IndividualSeries& series,
                              const Fallbacks& fallbacks, const FeatureConfig& config,
                              OutcomeMode mode, double threshold);

/// Stacks the prepared series of a pool into one person-time design.
struct PooledRows {
  Eigen::MatrixXd design;
  std::vector<double> targets;
  std::vector<std::string> individual_of_row;
};
PooledRows pool_rows(const std::vector<PreparedSeries>& series);

// ---------------------------------------------------------------------------
// Splitting and simulation

/// Splits by whole individuals; the tuning share is round(fraction * n).
std::pair<PanelDataset, PanelDataset> split_tuning_working(const PanelDataset& dataset,
                                                           double fraction,
                                                           std::uint64_t seed);

struct SimulationConfig {
  int n_individuals = 40;
  int min_sessions = 200;
  int max_sessions = 300;
  int n_predictors = 4;
  double intercept = 27.0;
  double individual_effect_sd = 2.0;
  double drift_slope = 0.0;
  double noise_sd = 2.0;
  double missing_rate = 0.01;
  double covariate_autocorrelation = 0.6;
  double outcome_lo = 0.0;
  double outcome_hi = 50.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Coefficient of session covariate j (0-based) in the simulator's linear predictor.
double simulated_covariate_effect(int j);
inline constexpr double kSimulatedAgeEffect = 0.5;
inline constexpr double kSimulatedSiteEffects[3] = {0.0, 1.0, -1.0};

/// Noise-free, unclipped linear predictor the simulator uses for session t of
/// an individual, given the individual's random effect and the fully observed
/// covariate values of session t-1 (empty for t = 1).
double simulated_linear_predictor(const SimulationConfig& config, double age, double site,
                                  double random_effect, int t,
                                  const std::vector<double>& previous_covariates);

/// Generative model: intercept + random effect + baseline effects + linear
/// term in the previous session's covariates + drift * t + noise, clipped to
/// the outcome bounds; covariates follow AR(1) processes and values go missing
/// completely at random.
PanelDataset simulate_panel(const SimulationConfig& config);

/// Same as simulate_panel, also returning each individual's random effect and
/// complete covariate paths (used by oracle tests).
struct SimulationTruth {
  std::vector<double> random_effects;
  std::vector<double> ages;
  std::vector<double> sites;
  std::vector<std::vector<std::vector<double>>> covariates;  // [individual][session][j]
};
PanelDataset simulate_panel(const SimulationConfig& config, SimulationTruth* truth);

}  // namespace posl
