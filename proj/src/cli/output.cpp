#include <cmath>
#include <map>

#include "posl/cli.hpp"
#include "posl/error.hpp"
#include "posl/text.hpp"

namespace posl::cli {

namespace {

std::string opt(const std::optional<double>& v) { return v ? text::format_real(*v) : std::string(); }

void final_cells(std::string& s, const FinalPrediction& f) {
  s += "," + text::format_real(f.value) + "," + text::format_real(f.raw) + "," + (f.truncated ? "1" : "0");
}

const char* scope_of(const std::string& id) { return id.rfind("hist_", 0) == 0 ? "historical" : "individual"; }

}  // namespace

std::string format_predictions_csv(const WorkingRun& run, const RunConfig& config) {
  std::string s = config.header_comments("predictions");
  s += "individual_id,session_index,position,observed,observed_raw";
  for (const char* prefix : {"pred_", "alpha_convex_", "alpha_nonconvex_"})
    for (const auto& id : run.learner_ids) s += "," + std::string(prefix) + id;
  s += ",dsl_choice";
  for (const char* name : {"dsl", "esl_convex", "esl_nonconvex"}) {
    const std::string n(name);
    s += "," + n + "," + n + "_raw," + n + "_truncated";
  }
  s += ",convexified,n_meta_rows,dropped_folds\n";

  for (const auto& r : run.records) {
    s += r.individual_id + "," + std::to_string(r.session_index) + "," + std::to_string(r.position) + "," +
         opt(r.observed) + "," + opt(r.observed_raw);
    for (double v : r.candidate_predictions) s += "," + text::format_real(v);
    for (double v : r.alpha_convex.alpha) s += "," + text::format_real(v);
    for (double v : r.alpha_nonconvex.alpha) s += "," + text::format_real(v);
    s += "," + r.dsl_choice_id;
    final_cells(s, r.dsl);
    final_cells(s, r.esl_convex);
    final_cells(s, r.esl_nonconvex);
    s += std::string(",") + (r.alpha_convex.convexified ? "1" : "0") + "," + std::to_string(r.n_meta_rows) + ",";
    for (std::size_t k = 0; k < r.dropped_folds.size(); ++k)
      s += (k ? ";" : "") + std::to_string(r.dropped_folds[k]);
    s += "\n";
  }
  return s;
}

std::string format_weights_csv(const WorkingRun& run, const RunConfig& config) {
  std::string s = config.header_comments("weights");
  s += "individual_id,session_index,position,learner,scope,alpha_convex,alpha_nonconvex,dsl_selected\n";
  for (const auto& r : run.records)
    for (std::size_t c = 0; c < r.candidate_ids.size(); ++c) {
      const auto& id = r.candidate_ids[c];
      s += r.individual_id + "," + std::to_string(r.session_index) + "," + std::to_string(r.position) + "," + id +
           "," + scope_of(id) + "," + text::format_real(r.alpha_convex.alpha[c]) + "," +
           text::format_real(r.alpha_nonconvex.alpha[c]) + "," +
           (static_cast<int>(c) == r.dsl_choice ? "1" : "0") + "\n";
    }
  return s;
}

PredictionTable parse_predictions_csv(const std::string& content, const std::string& source) {
  const auto lines = text::split_lines(content);
  std::size_t at = 0;
  while (at < lines.size() && (lines[at].empty() || lines[at].front() == '#')) ++at;
  if (at == lines.size()) throw DataError(source + ": no header");
  const auto header = text::split_csv_line(lines[at]);

  std::map<std::string, std::size_t> col;
  PredictionTable table;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(header[j]);
    if (!col.emplace(name, j).second) throw DataError(source + ": duplicate column '" + name + "'");
    if (name.rfind("pred_", 0) == 0) table.learner_ids.push_back(name.substr(5));
  }
  if (table.learner_ids.empty()) throw DataError(source + ": no candidate columns");
  auto index = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw DataError(source + ": missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = index("individual_id"), c_session = index("session_index"), c_pos = index("position"),
                    c_obs = index("observed"), c_raw = index("observed_raw"), c_choice = index("dsl_choice"),
                    c_conv = index("convexified"), c_meta = index("n_meta_rows"), c_drop = index("dropped_folds");
  const std::size_t n_cand = table.learner_ids.size();
  std::vector<std::size_t> c_pred, c_ac, c_an;
  for (const auto& id : table.learner_ids) {
    c_pred.push_back(index("pred_" + id));
    c_ac.push_back(index("alpha_convex_" + id));
    c_an.push_back(index("alpha_nonconvex_" + id));
  }
  std::size_t c_final[3][3];
  const char* finals[3] = {"dsl", "esl_convex", "esl_nonconvex"};
  for (int k = 0; k < 3; ++k) {
    const std::string n(finals[k]);
    c_final[k][0] = index(n);
    c_final[k][1] = index(n + "_raw");
    c_final[k][2] = index(n + "_truncated");
  }
  if (header.size() != 5 + 3 * n_cand + 1 + 9 + 3)
    throw DataError(source + ": unexpected column count " + std::to_string(header.size()));

  for (std::size_t li = at + 1; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li].front() == '#') continue;
    const std::string where = source + ":" + std::to_string(li + 1);
    const auto cells = text::split_csv_line(lines[li]);
    if (cells.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " cells");
    auto real = [&](std::size_t j) {
      const auto v = text::parse_real(cells[j]);
      if (!v) throw DataError(where + ": bad number '" + std::string(cells[j]) + "'");
      return *v;
    };
    auto maybe = [&](std::size_t j) -> std::optional<double> {
      if (cells[j].empty()) return std::nullopt;
      return real(j);
    };
    auto integer = [&](std::string_view cell) {
      const auto v = text::parse_integer(cell);
      if (!v) throw DataError(where + ": bad integer '" + std::string(cell) + "'");
      return static_cast<int>(*v);
    };
    auto flag = [&](std::size_t j) {
      const int v = integer(cells[j]);
      if (v != 0 && v != 1) throw DataError(where + ": flag must be 0 or 1");
      return v == 1;
    };

    PredictionRecord r;
    r.individual_id = std::string(cells[c_id]);
    if (r.individual_id.empty()) throw DataError(where + ": empty individual_id");
    r.session_index = integer(cells[c_session]);
    r.position = integer(cells[c_pos]);
    r.observed = maybe(c_obs);
    r.observed_raw = maybe(c_raw);
    r.candidate_ids = table.learner_ids;
    for (std::size_t c = 0; c < n_cand; ++c) {
      r.candidate_predictions.push_back(real(c_pred[c]));
      r.alpha_convex.alpha.push_back(real(c_ac[c]));
      r.alpha_nonconvex.alpha.push_back(real(c_an[c]));
    }
    r.alpha_convex.convexified = flag(c_conv);
    r.dsl_choice_id = std::string(cells[c_choice]);
    r.dsl_choice = -1;
    for (std::size_t c = 0; c < n_cand; ++c)
      if (table.learner_ids[c] == r.dsl_choice_id) r.dsl_choice = static_cast<int>(c);
    if (r.dsl_choice < 0) throw DataError(where + ": unknown dsl_choice '" + r.dsl_choice_id + "'");
    FinalPrediction* out[3] = {&r.dsl, &r.esl_convex, &r.esl_nonconvex};
    for (int k = 0; k < 3; ++k) {
      out[k]->value = real(c_final[k][0]);
      out[k]->raw = real(c_final[k][1]);
      out[k]->truncated = flag(c_final[k][2]);
    }
    r.n_meta_rows = integer(cells[c_meta]);
    const std::string_view drops = cells[c_drop];
    std::size_t start = 0;
    while (start < drops.size()) {
      auto end = drops.find(';', start);
      if (end == std::string_view::npos) end = drops.size();
      r.dropped_folds.push_back(integer(drops.substr(start, end - start)));
      start = end + 1;
    }
    table.records.push_back(std::move(r));
  }
  return table;
}

}  // namespace posl::cli
