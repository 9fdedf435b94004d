#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "survtransport/cli.hpp"
#include "survtransport/error.hpp"

namespace survtransport::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "' in " + where);
}

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : dir / path;
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

DataSchema parse_schema(const json& s) {
  check_keys(s, "schema", {"time", "event", "arm", "design_weight", "time_scale", "covariates"});
  DataSchema schema;
  if (s.contains("time")) schema.time = get<std::string>(s, "time", "schema");
  if (s.contains("event")) schema.event = get<std::string>(s, "event", "schema");
  if (s.contains("arm")) schema.arm = get<std::string>(s, "arm", "schema");
  if (s.contains("design_weight")) schema.design_weight = get<std::string>(s, "design_weight", "schema");
  if (s.contains("time_scale")) schema.time_scale = get<double>(s, "time_scale", "schema");
  if (!(schema.time_scale > 0.0)) throw ValidationError("config: schema.time_scale must be positive");
  if (!s.contains("covariates") || !s["covariates"].is_array())
    throw ValidationError("config: schema.covariates must be a list");
  std::set<std::string> seen;
  for (const auto& c : s["covariates"]) {
    CovariateSpec cov;
    if (c.is_string()) {
      cov.name = c.get<std::string>();
    } else {
      check_keys(c, "schema.covariates", {"name", "type", "levels", "reference", "ordinal"});
      cov.name = get<std::string>(c, "name", "schema.covariates");
      const std::string type = c.contains("type") ? get<std::string>(c, "type", cov.name) : "continuous";
      if (type != "continuous" && type != "categorical")
        throw ValidationError("config: covariate '" + cov.name + "' has unknown type '" + type + "'");
      cov.categorical = type == "categorical";
      if (c.contains("levels")) cov.levels = get<std::vector<std::string>>(c, "levels", cov.name);
      if (c.contains("reference")) cov.reference = get<std::string>(c, "reference", cov.name);
      if (c.contains("ordinal")) cov.ordinal = get<bool>(c, "ordinal", cov.name);
      if (cov.categorical && cov.levels.size() < 2)
        throw ValidationError("config: categorical covariate '" + cov.name + "' needs at least two levels");
    }
    if (!seen.insert(cov.name).second) throw ValidationError("config: covariate '" + cov.name + "' listed twice");
    schema.covariates.push_back(std::move(cov));
  }
  schema.expanded_names();  // validates reference levels
  return schema;
}

ExternalSummaryConfig parse_summary_source(const json& e, const std::filesystem::path& dir) {
  ExternalSummaryConfig out;
  out.summary = resolve(dir, get<std::string>(e, "summary", "external"));
  if (e.contains("copula")) out.copula = get<std::string>(e, "copula", "external");
  if (out.copula != "trial" && out.copula != "independent")
    throw ValidationError("config: external.copula must be 'trial' or 'independent'");
  if (e.contains("m")) out.m = get<std::size_t>(e, "m", "external");
  if (e.contains("overrides")) {
    for (const auto& o : e["overrides"]) {
      check_keys(o, "external.overrides", {"a", "b", "rank_correlation"});
      ExternalSummaryConfig::Override ov;
      ov.a = get<std::string>(o, "a", "external.overrides");
      ov.b = get<std::string>(o, "b", "external.overrides");
      ov.rank_correlation = get<double>(o, "rank_correlation", "external.overrides");
      if (!(ov.rank_correlation > -1.0 && ov.rank_correlation < 1.0))
        throw ValidationError("config: override rank_correlation must lie in (-1, 1)");
      out.overrides.push_back(std::move(ov));
    }
  }
  return out;
}

HareConfig parse_hare(const json& h) {
  check_keys(h, "hare", {"max_terms", "penalty", "covariate_knot_quantiles", "time_knot_quantiles", "min_events"});
  HareConfig cfg;
  if (h.contains("max_terms")) cfg.max_terms = get<std::size_t>(h, "max_terms", "hare");
  if (h.contains("penalty")) cfg.penalty = get<double>(h, "penalty", "hare");
  if (h.contains("covariate_knot_quantiles"))
    cfg.covariate_knot_quantiles = get<std::vector<double>>(h, "covariate_knot_quantiles", "hare");
  if (h.contains("time_knot_quantiles"))
    cfg.time_knot_quantiles = get<std::vector<double>>(h, "time_knot_quantiles", "hare");
  if (h.contains("min_events")) cfg.min_events = get<std::size_t>(h, "min_events", "hare");
  for (double q : cfg.covariate_knot_quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("config: hare knot quantiles must lie in (0, 1)");
  for (double q : cfg.time_knot_quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("config: hare knot quantiles must lie in (0, 1)");
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& config_dir) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }
  check_keys(in, "config",
             {"trial", "external", "schema", "arms", "calibration", "known_propensity", "horizon", "estimators",
              "bootstrap", "threads", "seed", "ph_transform", "hare", "isotonize", "ipcw_cap", "output_dir"});
  RunConfig cfg;
  cfg.config_dir = config_dir;
  if (!in.contains("trial")) throw ValidationError("config: 'trial' (path to the trial CSV) is required");
  cfg.trial_path = resolve(config_dir, get<std::string>(in, "trial", "config"));
  if (!in.contains("schema")) throw ValidationError("config: 'schema' is required");
  cfg.schema = parse_schema(in["schema"]);

  if (in.contains("external") && !in["external"].is_null()) {
    const json& e = in["external"];
    check_keys(e, "external", {"data", "summary", "copula", "overrides", "m"});
    if (e.contains("data") == e.contains("summary"))
      throw ValidationError("config: external needs exactly one of 'data' or 'summary'");
    if (e.contains("data")) {
      if (e.contains("copula") || e.contains("overrides") || e.contains("m"))
        throw ValidationError("config: copula, overrides and m apply to summary sources only");
      cfg.external_path = resolve(config_dir, get<std::string>(e, "data", "external"));
    } else {
      cfg.external_summary = parse_summary_source(e, config_dir);
    }
  }
  if (in.contains("arms")) {
    const auto arms = get<std::vector<std::string>>(in, "arms", "config");
    if (arms.size() != 2 || arms[0] == arms[1])
      throw ValidationError("config: 'arms' must list two distinct labels, experimental first");
    cfg.arms = std::make_pair(arms[0], arms[1]);
  }
  if (in.contains("calibration")) cfg.calibration = get<std::vector<std::string>>(in, "calibration", "config");
  if (in.contains("known_propensity")) {
    cfg.known_propensity = get<double>(in, "known_propensity", "config");
    if (!(*cfg.known_propensity > 0.0 && *cfg.known_propensity < 1.0))
      throw ValidationError("config: known_propensity must lie in (0, 1)");
  }
  if (in.contains("horizon")) cfg.horizon = get<double>(in, "horizon", "config");
  if (!(cfg.horizon > 0.0)) throw ValidationError("config: horizon must be positive");
  if (in.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& name : get<std::vector<std::string>>(in, "estimators", "config"))
      cfg.estimators.push_back(parse_estimator_tag(name));
    if (cfg.estimators.empty()) throw ValidationError("config: 'estimators' is empty");
  }
  if (in.contains("bootstrap")) cfg.bootstrap = get<int>(in, "bootstrap", "config");
  if (cfg.bootstrap < 0) throw ValidationError("config: bootstrap must be non-negative");
  if (in.contains("threads")) cfg.threads = get<int>(in, "threads", "config");
  if (cfg.threads < 1) throw ValidationError("config: threads must be at least 1");
  if (in.contains("seed")) cfg.seed = get<std::uint64_t>(in, "seed", "config");
  if (in.contains("ph_transform")) cfg.ph_transform = parse_time_transform(get<std::string>(in, "ph_transform", "config"));
  if (in.contains("hare")) cfg.hare = parse_hare(in["hare"]);
  if (in.contains("isotonize")) cfg.isotonize = get<bool>(in, "isotonize", "config");
  if (in.contains("ipcw_cap")) cfg.ipcw_cap = get<double>(in, "ipcw_cap", "config");
  if (!(cfg.ipcw_cap >= 1.0)) throw ValidationError("config: ipcw_cap must be at least 1");
  if (in.contains("output_dir")) cfg.output_dir = resolve(config_dir, get<std::string>(in, "output_dir", "config"));
  cfg.echo = in.dump();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_run_config(buf.str(), dir);
}

std::vector<CalibrationFunction> parse_calibration(const std::vector<std::string>& expressions,
                                                   const std::vector<std::string>& names) {
  auto column = [&](const std::string& name, const std::string& expr) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    throw ValidationError("calibration: '" + expr + "' refers to unknown covariate '" + name + "'");
  };
  std::vector<CalibrationFunction> out;
  for (const auto& expr : expressions) {
    if (const auto star = expr.find('*'); star != std::string::npos) {
      out.push_back(product_function(column(expr.substr(0, star), expr), column(expr.substr(star + 1), expr), expr));
    } else if (const auto caret = expr.find('^'); caret != std::string::npos) {
      const std::string pw = expr.substr(caret + 1);
      int power = 0;
      try {
        std::size_t used = 0;
        power = std::stoi(pw, &used);
        if (used != pw.size()) power = 0;
      } catch (const std::exception&) {
        power = 0;
      }
      if (power < 1) throw ValidationError("calibration: bad power in '" + expr + "'");
      out.push_back(moment_function(column(expr.substr(0, caret), expr), expr, power));
    } else {
      out.push_back(moment_function(column(expr, expr), expr, 1));
    }
  }
  return out;
}

}  // namespace survtransport::cli
