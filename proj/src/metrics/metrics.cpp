#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "posl/error.hpp"
#include "posl/metrics.hpp"

namespace posl {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("observed and predicted differ in length");
  if (a.empty()) throw ArgumentError("empty input");
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> ols_slope(std::span<const double> y, std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  return sxy / sxx;
}

void check_labels(std::span<const double> labels) {
  for (double l : labels)
    if (l != 0.0 && l != 1.0) throw ArgumentError("labels must be 0 or 1");
}

}  // namespace

AccuracyStats accuracy_stats(std::span<const double> observed, std::span<const double> predicted) {
  check_pair(observed, predicted);
  std::vector<double> abs_err(observed.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double r = observed[i] - predicted[i];
    abs_err[i] = std::abs(r);
    sq += r * r;
  }
  return {median(std::move(abs_err)), sq / static_cast<double>(observed.size())};
}

CalibrationStats calibration_stats(std::span<const double> observed, std::span<const double> predicted) {
  check_pair(observed, predicted);
  if (observed.size() < 2) throw ArgumentError("calibration needs at least 2 points");
  CalibrationStats c;
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += observed[i] - predicted[i];
  c.intercept = s / static_cast<double>(observed.size());
  c.slope = ols_slope(observed, predicted);
  return c;
}

const char* to_string(CurveMethod m) { return m == CurveMethod::binned ? "binned" : "local_linear"; }

CurveMethod parse_curve_method(const std::string& s) {
  if (s == "binned") return CurveMethod::binned;
  if (s == "local_linear") return CurveMethod::local_linear;
  throw ConfigError("unknown calibration curve method '" + s + "'");
}

std::vector<double> local_linear(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> at, double span) {
  if (x.size() != y.size() || x.empty()) throw ArgumentError("local_linear: bad input");
  if (!(span > 0.0 && span <= 1.0)) throw ArgumentError("local_linear: span must lie in (0, 1]");
  const std::size_t n = x.size();
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(span * static_cast<double>(n))), 2, n);
  std::vector<double> out;
  std::vector<double> d(n);
  for (double x0 : at) {
    for (std::size_t i = 0; i < n; ++i) d[i] = std::abs(x[i] - x0);
    std::vector<double> sorted = d;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    const double h = sorted[k - 1] * (1.0 + 1e-10) + 1e-300;
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] >= h) continue;
      const double u = d[i] / h;
      const double t = 1.0 - u * u * u;
      const double w = t * t * t;
      const double dx = x[i] - x0;
      sw += w;
      sx += w * dx;
      sy += w * y[i];
      sxx += w * dx * dx;
      sxy += w * dx * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (det > 1e-12 * sw * sxx && sxx > 0.0)
      out.push_back((sxx * sy - sx * sxy) / det);  // intercept of the local line at x0
    else
      out.push_back(sy / sw);
  }
  return out;
}

CalibrationCurve calibration_curve(std::span<const double> observed, std::span<const double> predicted,
                                   CurveMethod method, int resolution, double span) {
  check_pair(observed, predicted);
  if (resolution < 1) throw ArgumentError("calibration curve: resolution must be >= 1");
  const std::size_t n = observed.size();
  CalibrationCurve curve;
  curve.method = method;
  if (method == CurveMethod::binned) {
    const auto bins = static_cast<std::size_t>(resolution);
    if (n < 2 * bins) throw ArgumentError("calibration curve: too few points for " + std::to_string(bins) + " bins");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });
    for (std::size_t b = 0; b < bins; ++b) {
      const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
      double sp = 0.0, so = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        sp += predicted[order[k]];
        so += observed[order[k]];
      }
      const double m = static_cast<double>(hi - lo);
      curve.points.emplace_back(sp / m, so / m);
    }
    return curve;
  }
  if (n < 10) throw ArgumentError("calibration curve: local_linear needs at least 10 points");
  const auto [mn, mx] = std::minmax_element(predicted.begin(), predicted.end());
  std::vector<double> grid;
  for (int g = 0; g < resolution; ++g)
    grid.push_back(resolution == 1 ? 0.5 * (*mn + *mx) : *mn + (*mx - *mn) * g / (resolution - 1));
  const auto fitted = local_linear(predicted, observed, grid, span);
  for (std::size_t g = 0; g < grid.size(); ++g) curve.points.emplace_back(grid[g], fitted[g]);
  return curve;
}

Auroc auroc(std::span<const double> labels, std::span<const double> scores, bool with_ci) {
  check_pair(labels, scores);
  check_labels(labels);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, neg = 0.0, concordant = 0.0, tied = 0.0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    double gp = 0.0, gn = 0.0;
    while (end < order.size() && scores[order[end]] == scores[order[g]]) {
      (labels[order[end]] == 1.0 ? gp : gn) += 1.0;
      ++end;
    }
    concordant += gp * neg;  // positives above every earlier negative
    tied += gp * gn;
    pos += gp;
    neg += gn;
    g = end;
  }
  Auroc out;
  if (pos == 0.0 || neg == 0.0) {
    out.reason = "single class: AUROC undefined";
    return out;
  }
  const double a = (concordant + 0.5 * tied) / (pos * neg);
  out.auc = a;
  if (with_ci) {
    const double q1 = a / (2.0 - a), q2 = 2.0 * a * a / (1.0 + a);
    const double var = (a * (1.0 - a) + (pos - 1.0) * (q1 - a * a) + (neg - 1.0) * (q2 - a * a)) / (pos * neg);
    const double half = 1.959963984540054 * std::sqrt(std::max(var, 0.0));
    out.ci = std::make_pair(std::max(0.0, a - half), std::min(1.0, a + half));
  }
  return out;
}

const char* to_string(NetBenefitWeight w) {
  return w == NetBenefitWeight::prevalence_odds ? "prevalence_odds" : "threshold_odds";
}

NetBenefitWeight parse_net_benefit_weight(const std::string& s) {
  if (s == "prevalence_odds") return NetBenefitWeight::prevalence_odds;
  if (s == "threshold_odds") return NetBenefitWeight::threshold_odds;
  throw ConfigError("unknown net benefit weight '" + s + "'");
}

DecisionCurve decision_curve(std::span<const double> labels, std::span<const double> scores,
                             std::span<const double> thresholds, NetBenefitWeight weight) {
  check_pair(labels, scores);
  check_labels(labels);
  const double n = static_cast<double>(labels.size());
  const double positives = std::accumulate(labels.begin(), labels.end(), 0.0);
  DecisionCurve dc;
  dc.prevalence = positives / n;
  if (weight == NetBenefitWeight::prevalence_odds && dc.prevalence == 1.0)
    throw ArgumentError("net benefit undefined: prevalence is 1");
  for (double t : thresholds) {
    double w = 0.0;
    if (weight == NetBenefitWeight::prevalence_odds) {
      w = dc.prevalence / (1.0 - dc.prevalence);
    } else {
      if (!(t >= 0.0 && t < 1.0)) throw ArgumentError("threshold odds need thresholds in [0, 1)");
      w = t / (1.0 - t);
    }
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (scores[i] >= t) (labels[i] == 1.0 ? tp : fp) += 1.0;
    dc.thresholds.push_back(t);
    dc.net_benefit.push_back(tp / n - fp / n * w);
    dc.treat_all.push_back(dc.prevalence - (1.0 - dc.prevalence) * w);
  }
  return dc;
}

std::vector<PredictionSelector> all_selectors(const std::vector<std::string>& candidate_ids) {
  std::vector<PredictionSelector> out{{PredictionKind::dsl, 0, "dsl"},
                                      {PredictionKind::esl_convex, 0, "esl_convex"},
                                      {PredictionKind::esl_nonconvex, 0, "esl_nonconvex"}};
  for (std::size_t k = 0; k < candidate_ids.size(); ++k)
    out.push_back({PredictionKind::candidate, static_cast<int>(k), candidate_ids[k]});
  return out;
}

double selected_value(const PredictionRecord& r, const PredictionSelector& s) {
  switch (s.kind) {
    case PredictionKind::dsl: return r.dsl.value;
    case PredictionKind::esl_convex: return r.esl_convex.value;
    case PredictionKind::esl_nonconvex: return r.esl_nonconvex.value;
    case PredictionKind::candidate: return r.candidate_predictions.at(static_cast<std::size_t>(s.candidate));
  }
  return 0.0;
}

IndividualMetrics individual_metrics(const std::string& id, std::span<const double> observed,
                                     std::span<const double> predicted, OutcomeMode mode, double threshold) {
  IndividualMetrics m;
  m.individual_id = id;
  m.n = static_cast<int>(observed.size());
  const auto acc = accuracy_stats(observed, predicted);
  m.mdae = acc.mdae;
  m.mse = acc.mse;
  if (observed.size() >= 2) {
    const auto cal = calibration_stats(observed, predicted);
    m.calib_intercept = cal.intercept;
    m.calib_slope = cal.slope;
  } else {
    m.calib_intercept = observed[0] - predicted[0];
  }
  std::vector<double> labels(observed.begin(), observed.end());
  if (mode == OutcomeMode::continuous)
    for (double& l : labels) l = l >= threshold ? 1.0 : 0.0;
  const auto a = auroc(labels, predicted);
  m.auroc = a.auc;
  m.auroc_reason = a.reason;
  return m;
}

const char* to_string(ProfileMetric m) {
  switch (m) {
    case ProfileMetric::mdae: return "mdae";
    case ProfileMetric::calib_intercept: return "calib_intercept";
    case ProfileMetric::calib_slope: return "calib_slope";
  }
  return "mdae";
}

std::vector<std::pair<int, double>> time_profiles(const std::vector<ProfilePoint>& points, ProfileMetric metric,
                                                  double smoothing_span) {
  if (smoothing_span < 0.0 || smoothing_span > 1.0) throw ArgumentError("smoothing span must lie in [0, 1]");
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_time;
  for (const auto& p : points) {
    by_time[p.time].first.push_back(p.observed);
    by_time[p.time].second.push_back(p.predicted);
  }
  std::vector<std::pair<int, double>> out;
  for (const auto& [t, op] : by_time) {
    const auto& [obs, pred] = op;
    if (metric == ProfileMetric::calib_slope) {
      if (obs.size() < 2) continue;
      if (auto s = ols_slope(obs, pred)) out.emplace_back(t, *s);
      continue;
    }
    std::vector<double> v(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
      v[i] = metric == ProfileMetric::mdae ? std::abs(obs[i] - pred[i]) : obs[i] - pred[i];
    out.emplace_back(t, median(std::move(v)));
  }
  if (smoothing_span == 0.0 || out.size() < 3) return out;
  std::vector<double> x, y;
  for (const auto& [t, v] : out) {
    x.push_back(t);
    y.push_back(v);
  }
  const auto s = local_linear(x, y, x, smoothing_span);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].second = s[i];
  return out;
}

std::vector<std::pair<int, double>> time_profiles(const std::vector<PredictionRecord>& records,
                                                  const PredictionSelector& which, ProfileMetric metric,
                                                  double smoothing_span) {
  std::vector<ProfilePoint> points;
  for (const auto& r : records) {
    const double p = selected_value(r, which);
    if (r.observed && std::isfinite(p)) points.push_back({r.position, *r.observed, p});
  }
  return time_profiles(points, metric, smoothing_span);
}

}  // namespace posl
