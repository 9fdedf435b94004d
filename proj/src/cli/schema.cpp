#include <algorithm>
#include <charconv>
#include <cmath>

#include "survtransport/cli.hpp"
#include "survtransport/error.hpp"

namespace survtransport::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string row_label(std::size_t row) { return "row " + std::to_string(row + 1); }

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string s = trim(cell);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ValidationError(row_label(row) + ": cannot parse '" + cell + "' in column '" + column + "' as a number");
  return v;
}

bool parse_event(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string s = trim(cell);
  if (s == "1" || s == "true" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "FALSE") return false;
  throw ValidationError(row_label(row) + ": event indicator '" + cell + "' in column '" + column +
                        "' must be 0 or 1");
}

std::size_t require_column(const CsvTable& table, const std::string& name, const std::string& role) {
  const auto c = table.column(name);
  if (!c) throw ValidationError("missing required " + role + " column '" + name + "'");
  return *c;
}

std::size_t level_index(const CovariateSpec& cov, const std::string& cell, std::size_t row) {
  const std::string s = trim(cell);
  const auto it = std::find(cov.levels.begin(), cov.levels.end(), s);
  if (it == cov.levels.end())
    throw ValidationError(row_label(row) + ": unknown level '" + cell + "' for categorical '" + cov.name + "'");
  return static_cast<std::size_t>(it - cov.levels.begin());
}

std::size_t reference_index(const CovariateSpec& cov) {
  if (cov.reference.empty()) return 0;
  const auto it = std::find(cov.levels.begin(), cov.levels.end(), cov.reference);
  if (it == cov.levels.end())
    throw ValidationError("covariate '" + cov.name + "': reference level '" + cov.reference + "' is not a level");
  return static_cast<std::size_t>(it - cov.levels.begin());
}

// Writes the model-matrix entries of one covariate starting at `offset`.
void expand(const CovariateSpec& cov, double raw, Eigen::VectorXd& x, Eigen::Index& offset) {
  if (!cov.categorical) {
    x(offset++) = raw;
    return;
  }
  const std::size_t ref = reference_index(cov);
  for (std::size_t l = 0; l < cov.levels.size(); ++l) {
    if (l == ref) continue;
    x(offset++) = std::isnan(raw) ? NAN : (static_cast<std::size_t>(raw) == l ? 1.0 : 0.0);
  }
}

Eigen::Index expanded_width(const DataSchema& schema) {
  return static_cast<Eigen::Index>(schema.expanded_names().size());
}

}  // namespace

std::vector<std::string> DataSchema::expanded_names() const {
  std::vector<std::string> out;
  for (const auto& c : covariates) {
    if (!c.categorical) {
      out.push_back(c.name);
      continue;
    }
    if (c.levels.size() < 2) throw ValidationError("categorical covariate '" + c.name + "' needs at least two levels");
    const std::size_t ref = reference_index(c);
    for (std::size_t l = 0; l < c.levels.size(); ++l)
      if (l != ref) out.push_back(c.name + "=" + c.levels[l]);
  }
  return out;
}

const CovariateSpec* DataSchema::find(const std::string& name) const {
  for (const auto& c : covariates)
    if (c.name == name) return &c;
  return nullptr;
}

Ingested ingest_trial(const CsvTable& table, const DataSchema& schema,
                      const std::optional<std::pair<std::string, std::string>>& arms) {
  const std::size_t tcol = require_column(table, schema.time, "time");
  const std::size_t ecol = require_column(table, schema.event, "event");
  const std::size_t acol = require_column(table, schema.arm, "arm");
  std::vector<std::size_t> ccol;
  for (const auto& c : schema.covariates) ccol.push_back(require_column(table, c.name, "covariate"));
  const Eigen::Index width = expanded_width(schema);
  const auto nv = static_cast<Eigen::Index>(schema.covariates.size());

  Ingested out;
  out.report.rows = table.rows.size();
  std::vector<Eigen::VectorXd> raws;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    SubjectRecord rec;
    const std::string arm = trim(row[acol]);
    if (arms) {
      if (arm == arms->first) {
        rec.arm = 1;
      } else if (arm == arms->second) {
        rec.arm = 0;
      } else {
        ++out.report.dropped;
        continue;
      }
    } else if (arm == "1" || arm == "0") {
      rec.arm = arm == "1" ? 1 : 0;
    } else {
      throw ValidationError(row_label(r) + ": arm '" + row[acol] + "' must be 0 or 1 (or select two arms with --arms)");
    }
    rec.time = parse_number(row[tcol], r, schema.time) * schema.time_scale;
    if (rec.time < 0.0) throw ValidationError(row_label(r) + ": negative follow-up time " + trim(row[tcol]));
    rec.event = parse_event(row[ecol], r, schema.event);
    Eigen::VectorXd raw(nv);
    rec.covariates.resize(width);
    Eigen::Index offset = 0;
    for (Eigen::Index k = 0; k < nv; ++k) {
      const CovariateSpec& cov = schema.covariates[static_cast<std::size_t>(k)];
      const std::string& cell = row[ccol[static_cast<std::size_t>(k)]];
      raw(k) = cov.categorical ? static_cast<double>(level_index(cov, cell, r)) : parse_number(cell, r, cov.name);
      expand(cov, raw(k), rec.covariates, offset);
    }
    out.records.push_back(std::move(rec));
    raws.push_back(std::move(raw));
  }
  out.raw.resize(static_cast<Eigen::Index>(raws.size()), nv);
  for (std::size_t i = 0; i < raws.size(); ++i) out.raw.row(static_cast<Eigen::Index>(i)) = raws[i].transpose();
  out.report.records = out.records.size();
  if (out.report.dropped > 0)
    out.report.messages.push_back(std::to_string(out.report.dropped) + " row(s) outside the selected arms dropped");
  return out;
}

Ingested ingest_external(const CsvTable& table, const DataSchema& schema) {
  std::vector<std::optional<std::size_t>> ccol;
  for (const auto& c : schema.covariates) ccol.push_back(table.column(c.name));
  const std::optional<std::size_t> wcol =
      schema.design_weight.empty() ? std::nullopt : table.column(schema.design_weight);
  const Eigen::Index width = expanded_width(schema);
  const auto nv = static_cast<Eigen::Index>(schema.covariates.size());

  Ingested out;
  out.report.rows = table.rows.size();
  for (std::size_t k = 0; k < ccol.size(); ++k)
    if (!ccol[k]) out.report.messages.push_back("covariate '" + schema.covariates[k].name + "' absent from the external file");
  out.raw.resize(static_cast<Eigen::Index>(table.rows.size()), nv);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    SubjectRecord rec;
    rec.source = Source::External;
    if (wcol) {
      rec.design_weight = parse_number(row[*wcol], r, schema.design_weight);
      if (!(rec.design_weight > 0.0)) throw ValidationError(row_label(r) + ": design weight must be positive");
    }
    rec.covariates.resize(width);
    Eigen::Index offset = 0;
    for (Eigen::Index k = 0; k < nv; ++k) {
      const CovariateSpec& cov = schema.covariates[static_cast<std::size_t>(k)];
      double raw = NAN;
      if (const auto c = ccol[static_cast<std::size_t>(k)]) {
        const std::string& cell = row[*c];
        raw = cov.categorical ? static_cast<double>(level_index(cov, cell, r)) : parse_number(cell, r, cov.name);
      }
      out.raw(static_cast<Eigen::Index>(r), k) = raw;
      expand(cov, raw, rec.covariates, offset);
    }
    out.records.push_back(std::move(rec));
  }
  out.report.records = out.records.size();
  return out;
}

Records emulated_to_records(const EmulatedSample& sample, const DataSchema& schema) {
  const Eigen::Index width = expanded_width(schema);
  std::vector<std::optional<std::size_t>> source(schema.covariates.size());
  for (std::size_t k = 0; k < schema.covariates.size(); ++k)
    for (std::size_t v = 0; v < sample.names.size(); ++v)
      if (sample.names[v] == schema.covariates[k].name) source[k] = v;
  Records out;
  const auto m = static_cast<std::size_t>(sample.values.rows());
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    SubjectRecord rec;
    rec.source = Source::External;
    rec.covariates.resize(width);
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
      const CovariateSpec& cov = schema.covariates[k];
      double raw = NAN;
      if (source[k]) {
        const std::string label = sample.label(i, *source[k]);
        if (cov.categorical) {
          // Levels the schema does not know (an "unreported" level) leave the
          // covariate missing for that record.
          const auto it = std::find(cov.levels.begin(), cov.levels.end(), label);
          if (it != cov.levels.end()) raw = static_cast<double>(it - cov.levels.begin());
        } else
          raw = parse_number(label, i, cov.name);
      }
      expand(cov, raw, rec.covariates, offset);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace survtransport::cli
