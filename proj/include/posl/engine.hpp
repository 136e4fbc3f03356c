#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posl/ensemble.hpp"
#include "posl/execution.hpp"
#include "posl/learners.hpp"
#include "posl/paneldata.hpp"

namespace posl {

struct PoslSettings {
  OutcomeMode mode = OutcomeMode::continuous;
  double threshold = 24.0;  // binary mode: outcome >= threshold is a success
  SlConfig sl;              // bounds are forced to (0, 1) in binary mode
  int inner_initial_size = 5;
  int rwcv_window = 10;
  int first_prediction = 12;
  FeatureConfig features;
  /// Train the historical learners once on every working individual instead
  /// of once per left-out individual.
  bool shared_pool = false;
  Execution execution = Execution::parallel;

  /// Effective dSL loss and bounds for the mode.
  LossKind loss() const;
  double lo() const;
  double hi() const;
  void validate() const;
};

/// Individual specs (one per cv scheme) and historical specs.
struct Library {
  std::vector<LearnerSpec> individual;
  std::vector<LearnerSpec> historical;
};

/// Builds a library from family-level specs: each individual spec is
/// duplicated over {rocv, rwcv}; historical specs are copied once. Scope and
/// outcome mode of the inputs are overwritten.
Library make_library(const std::vector<LearnerSpec>& individual, const std::vector<LearnerSpec>& historical,
                     OutcomeMode mode);

struct PoslModel {
  Schema schema;
  PoslSettings settings;
  Fallbacks fallbacks;  // from the historical pool
  std::vector<LearnerSpec> individual;
  std::vector<FittedLearner> historical;
  std::vector<std::string> pool_ids;
  std::vector<std::string> warnings;

  /// Candidate order: individual learners then historical learners.
  std::vector<std::string> learner_ids() const;
  std::size_t n_candidates() const { return individual.size() + historical.size(); }
};

struct HistoricalFit {
  std::vector<FittedLearner> fitted;
  std::vector<std::string> warnings;
};

/// Fits each historical spec once on all person-time rows of the pool.
/// Non-converged learners are dropped with a warning; screened specs without
/// an explicit seed use `seed`.
HistoricalFit fit_historical(const PanelDataset& pool, const std::vector<LearnerSpec>& specs,
                             const PoslSettings& settings, std::uint64_t seed = 1);

PoslModel make_model(const PanelDataset& pool, const Library& library, const PoslSettings& settings,
                     std::uint64_t seed = 1);

struct FinalPrediction {
  double value = 0.0;  // within bounds
  double raw = 0.0;
  bool truncated = false;
};

struct PredictionRecord {
  std::string individual_id;
  int session_index = 0;  // session predicted
  int position = 0;       // its 1-based position among modelled sessions (tau + 1)
  std::vector<std::string> candidate_ids;
  /// One per candidate; NaN when the candidate's final refit failed.
  std::vector<double> candidate_predictions;
  AlphaWeights alpha_convex;
  AlphaWeights alpha_nonconvex;
  int dsl_choice = 0;
  std::string dsl_choice_id;
  FinalPrediction dsl;
  FinalPrediction esl_convex;
  FinalPrediction esl_nonconvex;
  /// Modelled target (outcome, or 0/1 in binary mode) and the raw outcome.
  std::optional<double> observed;
  std::optional<double> observed_raw;
  int n_meta_rows = 0;
  std::vector<int> dropped_folds;  // validated positions disregarded
};

/// POSL prediction for position tau + 1 of `series`, recomputed from the
/// inner fold plans over positions 1..tau.
PredictionRecord posl_predict_next(const PoslModel& model, const IndividualSeries& series, int tau);

struct IndividualRun {
  std::vector<PredictionRecord> records;
  bool skipped = false;
  std::vector<std::string> log;  // skip reason, disregarded folds
};

/// Forward validation from settings.first_prediction; out-of-fold
/// predictions are computed once per validated session and reused for every
/// later tau.
IndividualRun run_individual(const PoslModel& model, const IndividualSeries& series);

struct WorkingRun {
  std::vector<PredictionRecord> records;  // sorted by (individual, session)
  std::vector<std::string> log;
  std::vector<std::string> learner_ids;
};

/// Leave-one-individual-out: each individual is predicted with historical
/// learners trained on the other working individuals.
WorkingRun run_working_sample(const PanelDataset& working, const Library& library, const PoslSettings& settings,
                              std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Tuning

struct TuneGrid {
  Family family = Family::mean;
  std::vector<Hyperparameters> points;
};

struct FamilyTuning {
  Family family = Family::mean;
  Hyperparameters best;
  double best_loss = 0.0;
  std::vector<Hyperparameters> points;
  std::vector<double> losses;  // mean validation loss per grid point
};

struct TuneResult {
  std::vector<FamilyTuning> families;
  int n_folds = 0;
  std::vector<std::string> warnings;

  const FamilyTuning* find(Family f) const;
};

/// Cross-validation with folds split by individual (10, or one per individual
/// when fewer); the grid point with the smallest mean validation loss wins and
/// ties go to the simpler model.
TuneResult tune_hyperparameters(const PanelDataset& tuning, const std::vector<TuneGrid>& grid,
                                const PoslSettings& settings, std::uint64_t seed);

/// True when `a` is a simpler configuration of `family` than `b`.
bool simpler(Family family, const Hyperparameters& a, const Hyperparameters& b);

/// Overwrites the tuned keys of every spec of a tuned family.
void apply_tuning(std::vector<LearnerSpec>& specs, const TuneResult& result);

nlohmann::json to_json(const TuneResult& result);
TuneResult tune_result_from_json(const nlohmann::json& j);

}  // namespace posl
