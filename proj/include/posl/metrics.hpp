#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "posl/engine.hpp"

namespace posl {

struct AccuracyStats {
  double mdae = 0.0;
  double mse = 0.0;
};

/// Median absolute error (mean of the two central values for even counts)
/// and mean squared error.
AccuracyStats accuracy_stats(std::span<const double> observed, std::span<const double> predicted);

struct CalibrationStats {
  double intercept = 0.0;       // mean(observed - predicted)
  std::optional<double> slope;  // OLS slope of observed on predicted; empty for constant predictions
};

CalibrationStats calibration_stats(std::span<const double> observed, std::span<const double> predicted);

enum class CurveMethod { binned, local_linear };
const char* to_string(CurveMethod m);
CurveMethod parse_curve_method(const std::string& s);

struct CalibrationCurve {
  std::vector<std::pair<double, double>> points;  // (predicted, smoothed observed), predicted ascending
  CurveMethod method = CurveMethod::binned;
};

/// binned: `resolution` equal-count bins of the predictions, each point the
/// bin means. local_linear: tricube local linear regression of observed on
/// predicted (nearest `span` share of the points) at `resolution` evenly
/// spaced predictions.
CalibrationCurve calibration_curve(std::span<const double> observed, std::span<const double> predicted,
                                   CurveMethod method, int resolution, double span = 0.3);

/// Tricube local linear fit of y on x evaluated at `at`; each fit uses the
/// ceil(span * n) nearest points.
std::vector<double> local_linear(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> at, double span);

struct Auroc {
  std::optional<double> auc;
  std::optional<std::pair<double, double>> ci;  // 95%, Hanley-McNeil
  std::string reason;                           // set when auc is undefined
};

/// (concordant + 0.5 tied) / (positives * negatives); labels must be 0/1.
Auroc auroc(std::span<const double> labels, std::span<const double> scores, bool with_ci = false);

enum class NetBenefitWeight { prevalence_odds, threshold_odds };
const char* to_string(NetBenefitWeight w);
NetBenefitWeight parse_net_benefit_weight(const std::string& s);

struct DecisionCurve {
  std::vector<double> thresholds;
  std::vector<double> net_benefit;
  std::vector<double> treat_all;  // everyone called positive
  double prevalence = 0.0;
};

/// Scores >= threshold are called positive; net benefit = TP/n - FP/n * w with
/// w = p/(1-p) (prevalence_odds) or t/(1-t) (threshold_odds).
DecisionCurve decision_curve(std::span<const double> labels, std::span<const double> scores,
                             std::span<const double> thresholds, NetBenefitWeight weight);

// ---------------------------------------------------------------------------
// Prediction records

enum class PredictionKind { dsl, esl_convex, esl_nonconvex, candidate };

struct PredictionSelector {
  PredictionKind kind = PredictionKind::esl_nonconvex;
  int candidate = 0;
  std::string name;  // column label in reports
};

/// dsl, esl_convex, esl_nonconvex, then one selector per candidate id.
std::vector<PredictionSelector> all_selectors(const std::vector<std::string>& candidate_ids);
/// Final (bounded) value for the combinations, the raw candidate prediction otherwise.
double selected_value(const PredictionRecord& r, const PredictionSelector& s);

struct IndividualMetrics {
  std::string individual_id;
  double mdae = 0.0;
  double mse = 0.0;
  double calib_intercept = 0.0;
  std::optional<double> calib_slope;
  std::optional<double> auroc;
  std::string auroc_reason;
  int n = 0;
};

/// Labels for AUROC are 1{observed >= threshold} in continuous mode and the
/// observed 0/1 outcome in binary mode.
IndividualMetrics individual_metrics(const std::string& id, std::span<const double> observed,
                                     std::span<const double> predicted, OutcomeMode mode, double threshold);

enum class ProfileMetric { mdae, calib_intercept, calib_slope };
const char* to_string(ProfileMetric m);

struct ProfilePoint {
  int time = 0;
  double observed = 0.0;
  double predicted = 0.0;
};

/// Per time point, the median over individuals of |y - yhat| (mdae) or
/// y - yhat (calib_intercept), or the cross-sectional OLS slope (calib_slope;
/// times with fewer than 2 points or constant predictions are omitted).
/// span > 0 smooths the series with local_linear; span = 0 returns it raw.
std::vector<std::pair<int, double>> time_profiles(const std::vector<ProfilePoint>& points, ProfileMetric metric,
                                                  double smoothing_span);
std::vector<std::pair<int, double>> time_profiles(const std::vector<PredictionRecord>& records,
                                                  const PredictionSelector& which, ProfileMetric metric,
                                                  double smoothing_span);

}  // namespace posl
