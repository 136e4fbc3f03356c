#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "posl/error.hpp"
#include "posl/paneldata.hpp"

namespace posl {

const char* to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
  }
  return "continuous";
}

const char* to_string(ColumnRole r) { return r == ColumnRole::baseline ? "baseline" : "session"; }

const char* to_string(OutcomeMode m) { return m == OutcomeMode::binary ? "binary" : "continuous"; }

ColumnKind parse_column_kind(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "binary") return ColumnKind::binary;
  if (s == "categorical") return ColumnKind::categorical;
  throw DataError("unknown column kind '" + s + "'");
}

ColumnRole parse_column_role(const std::string& s) {
  if (s == "baseline") return ColumnRole::baseline;
  if (s == "session") return ColumnRole::session;
  throw DataError("unknown column role '" + s + "'");
}

OutcomeMode parse_outcome_mode(const std::string& s) {
  if (s == "continuous") return OutcomeMode::continuous;
  if (s == "binary") return OutcomeMode::binary;
  throw ConfigError("unknown outcome mode '" + s + "'");
}

std::vector<std::size_t> Schema::baseline_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].role == ColumnRole::baseline) out.push_back(c);
  return out;
}

std::vector<std::size_t> Schema::session_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].role == ColumnRole::session) out.push_back(c);
  return out;
}

void PanelDataset::validate() const {
  const std::size_t nb = schema.n_baseline();
  const std::size_t ns = schema.n_session();
  std::set<std::string> ids;
  for (const auto& s : individuals) {
    if (!ids.insert(s.id).second) throw DataError("duplicate individual id " + s.id);
    if (s.sessions.empty()) throw DataError("individual " + s.id + " has no sessions");
    if (s.baseline.size() != nb) throw DataError("baseline arity mismatch for individual " + s.id);
    int last = 0;
    for (const auto& r : s.sessions) {
      if (r.session_index < 1) throw DataError("session index < 1 for individual " + s.id);
      if (r.session_index <= last)
        throw DataError("non-monotone session index for individual " + s.id);
      last = r.session_index;
      if (r.covariates.size() != ns) throw DataError("covariate arity mismatch for individual " + s.id);
    }
  }
}

const IndividualSeries* PanelDataset::find(const std::string& id) const {
  for (const auto& s : individuals)
    if (s.id == id) return &s;
  return nullptr;
}

std::size_t PanelDataset::n_sessions() const {
  std::size_t n = 0;
  for (const auto& s : individuals) n += s.sessions.size();
  return n;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mode_of(const std::vector<double>& v) {
  std::map<double, std::size_t> counts;
  for (double x : v) ++counts[x];
  double best = 0.0;
  std::size_t best_n = 0;
  for (const auto& [x, n] : counts)  // ascending, so ties keep the lowest code
    if (n > best_n) {
      best = x;
      best_n = n;
    }
  return best;
}

double summarize(ColumnKind kind, const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return kind == ColumnKind::continuous ? median_of(v) : mode_of(v);
}

}  // namespace

Fallbacks compute_fallbacks(const PanelDataset& pool) {
  const auto bc = pool.schema.baseline_columns();
  const auto sc = pool.schema.session_columns();
  Fallbacks fb;
  for (std::size_t j = 0; j < bc.size(); ++j) {
    std::vector<double> vals;
    for (const auto& s : pool.individuals)
      if (s.baseline[j]) vals.push_back(*s.baseline[j]);
    const auto& spec = pool.schema.columns[bc[j]];
    fb.baseline.push_back(vals.empty() && spec.kind == ColumnKind::categorical
                              ? spec.levels.front()
                              : summarize(spec.kind, vals));
  }
  std::vector<double> outcomes;
  for (std::size_t j = 0; j < sc.size(); ++j) {
    std::vector<double> vals;
    for (const auto& s : pool.individuals)
      for (const auto& r : s.sessions)
        if (r.covariates[j]) vals.push_back(*r.covariates[j]);
    const auto& spec = pool.schema.columns[sc[j]];
    fb.session.push_back(vals.empty() && spec.kind == ColumnKind::categorical
                             ? spec.levels.front()
                             : summarize(spec.kind, vals));
  }
  for (const auto& s : pool.individuals)
    for (const auto& r : s.sessions)
      if (r.outcome) outcomes.push_back(*r.outcome);
  fb.outcome = outcomes.empty() ? 0.0 : median_of(outcomes);
  return fb;
}

std::pair<PanelDataset, PanelDataset> split_tuning_working(const PanelDataset& dataset,
                                                           double fraction, std::uint64_t seed) {
  if (dataset.individuals.empty()) throw ArgumentError("cannot split an empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("split fraction must lie in (0,1)");
  const std::size_t n = dataset.individuals.size();
  const auto n_tuning = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_tuning == 0 || n_tuning == n) throw ArgumentError("split leaves an empty partition");

  // Membership depends only on the id set and the seed, never on row order.
  std::vector<std::string> ids;
  for (const auto& s : dataset.individuals) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::set<std::string> tuning_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_tuning));

  std::vector<const IndividualSeries*> sorted;
  for (const auto& s : dataset.individuals) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  PanelDataset tuning{dataset.schema, {}}, working{dataset.schema, {}};
  for (const auto* s : sorted) (tuning_ids.count(s->id) ? tuning : working).individuals.push_back(*s);
  return {std::move(tuning), std::move(working)};
}

}  // namespace posl
