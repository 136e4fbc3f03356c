#include <algorithm>
#include <map>

#include "posl/error.hpp"
#include "posl/paneldata.hpp"
#include "posl/text.hpp"

namespace posl {

namespace {

void append_encoded(const ColumnSpec& spec, double v, std::vector<double>& out) {
  if (spec.kind == ColumnKind::categorical) {
    for (std::size_t l = 1; l < spec.levels.size(); ++l) out.push_back(v == spec.levels[l] ? 1.0 : 0.0);
  } else {
    out.push_back(v);
  }
}

void append_names(const ColumnSpec& spec, std::vector<std::string>& out) {
  if (spec.kind == ColumnKind::categorical) {
    for (std::size_t l = 1; l < spec.levels.size(); ++l) {
      out.push_back(spec.name + "=" + text::format_real(spec.levels[l]));
    }
  } else {
    out.push_back(spec.name);
  }
}

std::vector<std::size_t> history_slots(const Schema& schema, const FeatureConfig& config) {
  const auto sc = schema.session_columns();
  std::vector<std::size_t> slots;
  for (const auto& name : config.history_covariates) {
    bool found = false;
    for (std::size_t j = 0; j < sc.size(); ++j)
      if (schema.columns[sc[j]].name == name) {
        if (schema.columns[sc[j]].kind == ColumnKind::categorical)
          throw ConfigError("history covariate '" + name + "' is categorical");
        slots.push_back(j);
        found = true;
      }
    if (!found) throw ConfigError("history covariate '" + name + "' is not a session column");
  }
  return slots;
}

/// Median (continuous) or mode (discrete) of the non-missing values of
/// session covariate j over positions [0, end).
std::optional<double> prior_summary(const IndividualSeries& series, std::size_t j, int end,
                                    ColumnKind kind) {
  std::vector<double> vals;
  for (int p = 0; p < end; ++p)
    if (const auto& v = series.sessions[static_cast<std::size_t>(p)].covariates[j]) vals.push_back(*v);
  if (vals.empty()) return std::nullopt;
  if (kind == ColumnKind::continuous) {
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    return n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  }
  std::map<double, int> counts;
  for (double x : vals) ++counts[x];
  double best = 0.0;
  int best_n = 0;
  for (const auto& [x, n] : counts)
    if (n > best_n) {
      best = x;
      best_n = n;
    }
  return best;
}

}  // namespace

std::vector<double> FeatureRow::design() const {
  std::vector<double> out = values;
  for (auto m : missing_indicators) out.push_back(m);
  return out;
}

std::vector<std::string> feature_names(const Schema& schema, const FeatureConfig& config) {
  std::vector<std::string> names;
  for (auto c : schema.baseline_columns()) append_names(schema.columns[c], names);
  for (auto c : schema.session_columns()) append_names(schema.columns[c], names);
  names.push_back("outcome_mean");
  const auto sc = schema.session_columns();
  for (auto j : history_slots(schema, config)) names.push_back(schema.columns[sc[j]].name + "_mean");
  if (config.include_position) names.push_back("position");
  for (auto c : schema.baseline_columns()) names.push_back(schema.columns[c].name + "_missing");
  for (auto c : schema.session_columns()) names.push_back(schema.columns[c].name + "_missing");
  return names;
}

std::size_t feature_arity(const Schema& schema, const FeatureConfig& config) {
  return feature_names(schema, config).size();
}

FeatureRow build_features(const Schema& schema, const IndividualSeries& series, int t,
                          const Fallbacks& fallbacks, const FeatureConfig& config) {
  const int T = static_cast<int>(series.sessions.size());
  if (t < 1 || t > T)
    throw ArgumentError("feature position " + std::to_string(t) + " out of range 1.." + std::to_string(T));
  if (config.covariate_lag < 0) throw ConfigError("covariate_lag must be >= 0");
  const auto bc = schema.baseline_columns();
  const auto sc = schema.session_columns();
  if (fallbacks.baseline.size() != bc.size() || fallbacks.session.size() != sc.size())
    throw ArgumentError("fallback arity does not match the schema");

  FeatureRow row;
  row.session_index = series.sessions[static_cast<std::size_t>(t - 1)].session_index;
  std::vector<std::uint8_t> base_missing, sess_missing;

  for (std::size_t j = 0; j < bc.size(); ++j) {
    const auto& v = series.baseline[j];
    base_missing.push_back(v ? 0 : 1);
    append_encoded(schema.columns[bc[j]], v ? *v : fallbacks.baseline[j], row.values);
  }

  const int source = t - config.covariate_lag;  // 1-based position read for session covariates
  for (std::size_t j = 0; j < sc.size(); ++j) {
    const auto& spec = schema.columns[sc[j]];
    MaybeReal v;
    if (source >= 1) v = series.sessions[static_cast<std::size_t>(source - 1)].covariates[j];
    double value;
    if (v) {
      value = *v;
      sess_missing.push_back(0);
    } else {
      sess_missing.push_back(1);
      std::optional<double> imputed;
      if (source >= 2) imputed = prior_summary(series, j, source - 1, spec.kind);
      value = imputed ? *imputed : fallbacks.session[j];
    }
    append_encoded(spec, value, row.values);
  }

  auto window_mean = [&](int window, auto&& get) -> std::optional<double> {
    double sum = 0.0;
    int n = 0;
    for (int p = std::max(1, t - window); p < t; ++p)
      if (MaybeReal v = get(series.sessions[static_cast<std::size_t>(p - 1)])) {
        sum += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / n;
  };

  auto om = window_mean(config.outcome_window, [](const SessionRecord& r) { return r.outcome; });
  row.values.push_back(om ? *om : fallbacks.outcome);
  for (auto j : history_slots(schema, config)) {
    auto m = window_mean(config.aux_window, [j](const SessionRecord& r) { return r.covariates[j]; });
    row.values.push_back(m ? *m : fallbacks.session[j]);
  }
  if (config.include_position) row.values.push_back(static_cast<double>(t));

  row.missing_indicators = std::move(base_missing);
  row.missing_indicators.insert(row.missing_indicators.end(), sess_missing.begin(), sess_missing.end());
  return row;
}

IndividualSeries filter_for_mode(const IndividualSeries& series, OutcomeMode mode) {
  if (mode == OutcomeMode::binary) return series;
  IndividualSeries out{series.id, series.baseline, {}};
  for (const auto& r : series.sessions)
    if (r.outcome) out.sessions.push_back(r);
  return out;
}

PreparedSeries prepare_series(const Schema& schema, const IndividualSeries& series,
                              const Fallbacks& fallbacks, const FeatureConfig& config,
                              OutcomeMode mode, double threshold) {
  const IndividualSeries kept = filter_for_mode(series, mode);
  PreparedSeries out;
  out.id = series.id;
  const int T = static_cast<int>(kept.sessions.size());
  const auto arity = static_cast<Eigen::Index>(feature_arity(schema, config));
  out.design.resize(T, arity);
  for (int t = 1; t <= T; ++t) {
    const auto& rec = kept.sessions[static_cast<std::size_t>(t - 1)];
    auto row = build_features(schema, kept, t, fallbacks, config).design();
    for (Eigen::Index c = 0; c < arity; ++c) out.design(t - 1, c) = row[static_cast<std::size_t>(c)];
    out.session_indices.push_back(rec.session_index);
    out.raw_outcomes.push_back(rec.outcome);
    if (mode == OutcomeMode::binary)
      out.targets.push_back(rec.outcome && *rec.outcome >= threshold ? 1.0 : 0.0);
    else
      out.targets.push_back(*rec.outcome);
  }
  return out;
}

PooledRows pool_rows(const std::vector<PreparedSeries>& series) {
  PooledRows out;
  Eigen::Index n = 0, p = 0;
  for (const auto& s : series) {
    n += s.design.rows();
    p = std::max(p, s.design.cols());
  }
  out.design.resize(n, p);
  Eigen::Index r = 0;
  for (const auto& s : series) {
    if (s.design.rows() == 0) continue;
    if (s.design.cols() != p) throw ArgumentError("pooled series disagree on feature arity");
    out.design.middleRows(r, s.design.rows()) = s.design;
    r += s.design.rows();
    out.targets.insert(out.targets.end(), s.targets.begin(), s.targets.end());
    out.individual_of_row.insert(out.individual_of_row.end(), s.targets.size(), s.id);
  }
  return out;
}

}  // namespace posl
