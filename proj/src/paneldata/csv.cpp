#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "posl/error.hpp"
#include "posl/paneldata.hpp"
#include "posl/text.hpp"

namespace posl {

namespace {

constexpr const char* kIdColumn = "individual_id";
constexpr const char* kSessionColumn = "session_index";
constexpr const char* kOutcomeColumn = "outcome";

std::string row_ref(const std::string& source, std::size_t line) {
  return source + " line " + std::to_string(line);
}

}  // namespace

const SchemaSidecar::Entry* SchemaSidecar::find(const std::string& name) const {
  for (const auto& [n, e] : entries)
    if (n == name) return &e;
  return nullptr;
}

SchemaSidecar load_schema_sidecar(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed schema sidecar " + path.string() + ": " + e.what());
  }
  if (!doc.contains("columns") || !doc["columns"].is_object())
    throw DataError("schema sidecar " + path.string() + " lacks a \"columns\" object");
  SchemaSidecar out;
  try {
    for (const auto& [name, spec] : doc["columns"].items()) {
      SchemaSidecar::Entry e;
      e.kind = parse_column_kind(spec.at("kind").get<std::string>());
      e.role = parse_column_role(spec.at("role").get<std::string>());
      if (spec.contains("levels")) e.levels = spec["levels"].get<std::vector<double>>();
      if (e.kind == ColumnKind::categorical && e.levels.empty())
        throw DataError("categorical column '" + name + "' declares no levels");
      out.entries.emplace_back(name, std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed schema sidecar " + path.string() + ": " + e.what());
  }
  return out;
}

void save_schema_sidecar(const Schema& schema, const std::filesystem::path& path) {
  nlohmann::ordered_json cols = nlohmann::ordered_json::object();
  for (const auto& c : schema.columns) {
    nlohmann::ordered_json e;
    e["kind"] = to_string(c.kind);
    e["role"] = to_string(c.role);
    if (c.kind == ColumnKind::categorical) e["levels"] = c.levels;
    cols[c.name] = e;
  }
  nlohmann::ordered_json doc;
  doc["columns"] = cols;
  text::write_file_atomic(path, doc.dump(2) + "\n");
}

PanelDataset load_panel_csv(const std::filesystem::path& path, const SchemaSidecar& sidecar) {
  return parse_panel_csv(text::read_file(path), sidecar, path.string());
}

PanelDataset parse_panel_csv(const std::string& content, const SchemaSidecar& sidecar,
                             const std::string& source) {
  auto lines = text::split_lines(content);
  std::size_t first = 0;
  while (first < lines.size() && (lines[first].empty() || lines[first].front() == '#')) ++first;
  if (first == lines.size()) throw DataError(source + ": missing header row");

  auto header = text::split_csv_line(lines[first]);
  int id_col = -1, session_col = -1, outcome_col = -1;
  PanelDataset ds;
  std::vector<int> column_of_field(header.size(), -1);
  std::set<std::string> seen;
  for (std::size_t f = 0; f < header.size(); ++f) {
    std::string name(header[f]);
    if (!seen.insert(name).second) throw DataError(source + ": duplicate header column '" + name + "'");
    if (name == kIdColumn) {
      id_col = static_cast<int>(f);
    } else if (name == kSessionColumn) {
      session_col = static_cast<int>(f);
    } else if (name == kOutcomeColumn) {
      outcome_col = static_cast<int>(f);
    } else {
      const auto* e = sidecar.find(name);
      if (!e) throw DataError(source + ": header column '" + name + "' is not declared in the schema");
      column_of_field[f] = static_cast<int>(ds.schema.columns.size());
      ds.schema.columns.push_back({name, e->kind, e->role, e->levels});
    }
  }
  if (id_col < 0 || session_col < 0 || outcome_col < 0)
    throw DataError(source + ": header must contain individual_id, session_index and outcome");
  for (const auto& [name, e] : sidecar.entries)
    if (!seen.count(name)) throw DataError(source + ": schema column '" + name + "' missing from header");

  const auto base_cols = ds.schema.baseline_columns();
  const auto sess_cols = ds.schema.session_columns();
  std::vector<int> slot(ds.schema.columns.size(), -1);
  for (std::size_t j = 0; j < base_cols.size(); ++j) slot[base_cols[j]] = static_cast<int>(j);
  for (std::size_t j = 0; j < sess_cols.size(); ++j) slot[sess_cols[j]] = static_cast<int>(j);

  std::map<std::string, std::size_t> index_of;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    const auto line = lines[li];
    if (line.empty() || line.front() == '#') continue;
    const std::size_t lineno = li + 1;
    auto fields = text::split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError(row_ref(source, lineno) + ": arity mismatch (expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()) + ")");
    std::string id(fields[static_cast<std::size_t>(id_col)]);
    if (id.empty()) throw DataError(row_ref(source, lineno) + ": empty individual_id");
    auto session = text::parse_integer(fields[static_cast<std::size_t>(session_col)]);
    if (!session || *session < 1)
      throw DataError(row_ref(source, lineno) + ": session_index must be a positive integer");

    auto [it, inserted] = index_of.emplace(id, ds.individuals.size());
    if (inserted) {
      IndividualSeries s;
      s.id = id;
      s.baseline.assign(base_cols.size(), std::nullopt);
      ds.individuals.push_back(std::move(s));
    }
    auto& series = ds.individuals[it->second];
    if (!series.sessions.empty()) {
      const int last = series.sessions.back().session_index;
      if (*session == last)
        throw DataError(row_ref(source, lineno) + ": duplicate (individual, session) pair (" + id +
                        ", " + std::to_string(*session) + ")");
      if (*session < last)
        throw DataError(row_ref(source, lineno) + ": non-monotone session index for individual " + id);
    }

    SessionRecord rec;
    rec.session_index = static_cast<int>(*session);
    rec.covariates.assign(sess_cols.size(), std::nullopt);
    auto parse_cell = [&](std::size_t f, const char* what) -> MaybeReal {
      auto cell = fields[f];
      if (cell.empty()) return std::nullopt;
      auto v = text::parse_real(cell);
      if (!v || std::isnan(*v))
        throw DataError(row_ref(source, lineno) + ": non-numeric " + what + " '" + std::string(cell) + "'");
      return v;
    };
    rec.outcome = parse_cell(static_cast<std::size_t>(outcome_col), "outcome");
    for (std::size_t f = 0; f < header.size(); ++f) {
      const int c = column_of_field[f];
      if (c < 0) continue;
      const auto& spec = ds.schema.columns[static_cast<std::size_t>(c)];
      MaybeReal v = parse_cell(f, spec.name.c_str());
      if (v) {
        if (spec.kind == ColumnKind::binary && *v != 0.0 && *v != 1.0)
          throw DataError(row_ref(source, lineno) + ": binary column '" + spec.name + "' holds " +
                          text::format_real(*v));
        if (spec.kind == ColumnKind::categorical &&
            std::find(spec.levels.begin(), spec.levels.end(), *v) == spec.levels.end())
          throw DataError(row_ref(source, lineno) + ": undeclared level " + text::format_real(*v) +
                          " in categorical column '" + spec.name + "'");
      }
      const auto s = static_cast<std::size_t>(slot[static_cast<std::size_t>(c)]);
      if (spec.role == ColumnRole::session) {
        rec.covariates[s] = v;
      } else if (v) {
        if (series.baseline[s] && *series.baseline[s] != *v)
          throw DataError(row_ref(source, lineno) + ": baseline column '" + spec.name +
                          "' changes within individual " + id);
        series.baseline[s] = v;
      }
    }
    series.sessions.push_back(std::move(rec));
  }
  ds.validate();
  return ds;
}

std::string format_panel_csv(const PanelDataset& ds) {
  const auto base_cols = ds.schema.baseline_columns();
  const auto sess_cols = ds.schema.session_columns();
  std::vector<int> slot(ds.schema.columns.size(), -1);
  for (std::size_t j = 0; j < base_cols.size(); ++j) slot[base_cols[j]] = static_cast<int>(j);
  for (std::size_t j = 0; j < sess_cols.size(); ++j) slot[sess_cols[j]] = static_cast<int>(j);

  std::ostringstream out;
  out << kIdColumn << ',' << kSessionColumn << ',' << kOutcomeColumn;
  for (const auto& c : ds.schema.columns) out << ',' << c.name;
  out << '\n';
  auto cell = [](const MaybeReal& v) { return v ? text::format_real(*v) : std::string(); };
  for (const auto& s : ds.individuals) {
    for (const auto& r : s.sessions) {
      out << s.id << ',' << r.session_index << ',' << cell(r.outcome);
      for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
        const auto k = static_cast<std::size_t>(slot[c]);
        out << ',' << cell(ds.schema.columns[c].role == ColumnRole::baseline ? s.baseline[k]
                                                                             : r.covariates[k]);
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace posl
