#include <algorithm>
#include <cmath>

#include "posl/ensemble.hpp"
#include "posl/error.hpp"

namespace posl {

const char* to_string(MetaKind k) {
  switch (k) {
    case MetaKind::dsl: return "dsl";
    case MetaKind::esl_convex: return "esl_convex";
    case MetaKind::esl_nonconvex: return "esl_nonconvex";
  }
  return "dsl";
}

const char* to_string(LossKind k) {
  return k == LossKind::squared ? "squared" : "negative_log_likelihood";
}

void MetaDataset::validate() const {
  const auto r = observed.size();
  if (static_cast<std::size_t>(predictions.rows()) != r || time_weights.size() != r)
    throw ArgumentError("meta dataset: row counts differ");
  if (!session_indices.empty() && session_indices.size() != r)
    throw ArgumentError("meta dataset: session index count differs");
  if (!learner_ids.empty() && learner_ids.size() != learners())
    throw ArgumentError("meta dataset: learner id count differs");
  if (!predictions.allFinite()) throw ArgumentError("meta dataset: non-finite prediction");
  for (std::size_t i = 0; i < r; ++i)
    if (!std::isfinite(observed[i]) || !(time_weights[i] >= 0.0) || !std::isfinite(time_weights[i]))
      throw ArgumentError("meta dataset: invalid observed value or weight");
}

void SlConfig::validate() const {
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta must lie in [0, 1)");
  if (recency_window < 0) throw ConfigError("recency_window must be >= 0");
  if (!(lo < hi)) throw ConfigError("bounds need lo < hi");
}

std::vector<double> time_weights(int tau, std::span<const int> sessions, double delta, int recency_window) {
  std::vector<double> w;
  w.reserve(sessions.size());
  for (int t : sessions)
    w.push_back(t >= tau - recency_window ? 1.0 : std::pow(1.0 - delta, static_cast<double>(tau - t)));
  return w;
}

double cumulative_weighted_loss(std::span<const double> observed, std::span<const double> predicted,
                                std::span<const double> omega, LossKind kind) {
  if (observed.size() != predicted.size() || observed.size() != omega.size())
    throw ArgumentError("loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double y = observed[i];
    if (kind == LossKind::squared) {
      const double r = y - predicted[i];
      s += omega[i] * r * r;
    } else {
      const double p = std::clamp(predicted[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
      s -= omega[i] * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  }
  return s;
}

int dsl_select(const MetaDataset& meta, LossKind kind) {
  meta.validate();
  if (meta.rows() == 0 || meta.learners() == 0) throw ArgumentError("dsl: empty meta dataset");
  int best = 0;
  double best_loss = 0.0;
  std::vector<double> column(meta.rows());
  for (std::size_t c = 0; c < meta.learners(); ++c) {
    for (std::size_t i = 0; i < meta.rows(); ++i)
      column[i] = meta.predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    const double loss = cumulative_weighted_loss(meta.observed, column, meta.time_weights, kind);
    if (c == 0 || loss < best_loss) {
      best = static_cast<int>(c);
      best_loss = loss;
    }
  }
  return best;
}

Combination truncate(double raw, double lo, double hi) {
  if (!std::isfinite(raw)) throw ArgumentError("combine: non-finite prediction");
  Combination c;
  c.raw = raw;
  c.value = std::clamp(raw, lo, hi);
  c.truncated = c.value != raw;
  return c;
}

Combination combine_and_truncate(std::span<const double> predictions, const AlphaWeights& alpha, double lo,
                                 double hi) {
  if (predictions.size() != alpha.alpha.size()) throw ArgumentError("combine: length mismatch");
  double raw = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    if (!std::isfinite(predictions[k])) throw ArgumentError("combine: non-finite prediction");
    raw += alpha.alpha[k] * predictions[k];
  }
  return truncate(raw, lo, hi);
}

Combination combine_and_truncate(std::span<const double> predictions, int choice, double lo, double hi) {
  if (choice < 0 || static_cast<std::size_t>(choice) >= predictions.size())
    throw ArgumentError("combine: choice out of range");
  for (double p : predictions)
    if (!std::isfinite(p)) throw ArgumentError("combine: non-finite prediction");
  return truncate(predictions[static_cast<std::size_t>(choice)], lo, hi);
}

}  // namespace posl
