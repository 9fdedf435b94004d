#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "survtransport/cli.hpp"
#include "survtransport/error.hpp"

namespace survtransport::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "survtransport 0.1.0";

struct LoadedData {
  Ingested trial;
  Records external;
  json external_info = json::object();
  std::optional<EmulatedSample> emulated;
};

// Collects written files for the manifest, in write order.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    files_.push_back({{"name", name}, {"bytes", text.size()}, {"fnv1a64", fnv1a_hex(text)}});
  }
  const json& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  json files_ = json::array();
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    out.push_back(item);
  }
  return out;
}

void apply_overrides(RunConfig& cfg, const CommandLine& cmd) {
  if (cmd.seed) cfg.seed = *cmd.seed;
  if (cmd.boot) {
    if (*cmd.boot < 0) throw ValidationError("--boot must be non-negative");
    cfg.bootstrap = *cmd.boot;
  }
  if (cmd.horizon) {
    if (!(*cmd.horizon > 0.0)) throw ValidationError("--horizon must be positive");
    cfg.horizon = *cmd.horizon;
  }
  if (cmd.estimators) {
    cfg.estimators.clear();
    for (const auto& name : split(*cmd.estimators, ',')) cfg.estimators.push_back(parse_estimator_tag(name));
    if (cfg.estimators.empty()) throw ValidationError("--estimators is empty");
  }
  if (cmd.arms) {
    const auto arms = split(*cmd.arms, ',');
    if (arms.size() != 2 || arms[0] == arms[1])
      throw ValidationError("--arms expects two distinct labels: experimental,control");
    cfg.arms = std::make_pair(arms[0], arms[1]);
  }
  if (cmd.out) {
    cfg.output_dir = *cmd.out;
  } else if (const char* env = std::getenv("SURVTRANSPORT_OUT"); env && *env) {
    cfg.output_dir = env;
  }
}

Ingested load_trial_checked(const RunConfig& cfg) {
  Ingested trial = ingest_trial(read_csv(cfg.trial_path), cfg.schema, cfg.arms);
  if (trial.records.empty()) throw ValidationError("trial: no records after arm selection");
  for (int a = 0; a < 2; ++a)
    if (std::none_of(trial.records.begin(), trial.records.end(), [&](const SubjectRecord& r) { return r.arm == a; }))
      throw ValidationError("trial: arm " + std::to_string(a) + " has no records");
  return trial;
}

SummarySpec load_summary(const ExternalSummaryConfig& src, const RunConfig& cfg, const Ingested& trial) {
  std::ifstream in(src.summary);
  if (!in) throw ValidationError("cannot open summary '" + src.summary.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  SummarySpec spec = summary_spec_from_json(buf.str());
  fill_ranges(spec, [&](const std::string& name) -> std::optional<std::pair<double, double>> {
    for (std::size_t k = 0; k < cfg.schema.covariates.size(); ++k) {
      if (cfg.schema.covariates[k].name != name || cfg.schema.covariates[k].categorical) continue;
      const auto col = trial.raw.col(static_cast<Eigen::Index>(k));
      if (col.size() == 0) return std::nullopt;
      return std::make_pair(col.minCoeff(), col.maxCoeff());
    }
    return std::nullopt;
  });
  normalize_summary(spec);
  return spec;
}

// Trial copula over the summary variables the schema knows; categorical
// levels are re-indexed to the summary's level order.
CopulaSpec trial_copula(const SummarySpec& spec, const RunConfig& cfg, const Ingested& trial) {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;
  for (const auto& v : spec.variables) {
    if (v.absent) continue;
    for (std::size_t k = 0; k < cfg.schema.covariates.size(); ++k) {
      const CovariateSpec& cov = cfg.schema.covariates[k];
      if (cov.name != v.name) continue;
      Eigen::VectorXd col = trial.raw.col(static_cast<Eigen::Index>(k));
      if (const auto* cat = std::get_if<CategoricalMargin>(&v.margin); cat && cov.categorical) {
        for (Eigen::Index i = 0; i < col.size(); ++i) {
          const std::string& label = cov.levels[static_cast<std::size_t>(col(i))];
          const auto it = std::find(cat->levels.begin(), cat->levels.end(), label);
          if (it != cat->levels.end()) col(i) = static_cast<double>(it - cat->levels.begin());
        }
      }
      names.push_back(v.name);
      columns.push_back(std::move(col));
    }
  }
  Eigen::MatrixXd data(trial.raw.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) data.col(static_cast<Eigen::Index>(k)) = columns[k];
  return estimate_copula(data, names);
}

EmulationSetup setup_emulation(const ExternalSummaryConfig& src, const RunConfig& cfg, const Ingested& trial) {
  EmulationSetup e;
  e.spec = load_summary(src, cfg, trial);
  std::vector<std::string> names;
  for (const auto& v : e.spec.variables)
    if (!v.absent) names.push_back(v.name);
  e.copula = src.copula == "trial" ? trial_copula(e.spec, cfg, trial) : independent_copula(names);
  for (const auto& o : src.overrides) override_copula(e.copula, o.a, o.b, o.rank_correlation);
  e.m = src.m.value_or(e.spec.m);
  e.seed = derive_seed(cfg.seed, 1, 0);
  return e;
}

EmulatedSample emulate_external(const ExternalSummaryConfig& src, const RunConfig& cfg, const Ingested& trial,
                                json& info) {
  const EmulationSetup e = setup_emulation(src, cfg, trial);
  info = {{"source", "summary"},
          {"population", e.spec.population},
          {"m", e.m},
          {"copula", src.copula},
          {"emulation_seed", e.seed},
          {"summary_notes", e.spec.notes},
          {"copula_notes", e.copula.notes}};
  return emulate_sample(e.spec, e.copula, e.m, e.seed);
}

LoadedData load_data(const RunConfig& cfg, bool need_external) {
  LoadedData data;
  data.trial = load_trial_checked(cfg);
  if (cfg.external_path) {
    Ingested ext = ingest_external(read_csv(*cfg.external_path), cfg.schema);
    data.external = std::move(ext.records);
    data.external_info = {{"source", "data"}, {"records", data.external.size()}, {"messages", ext.report.messages}};
  } else if (cfg.external_summary) {
    data.emulated = emulate_external(*cfg.external_summary, cfg, data.trial, data.external_info);
    data.external = emulated_to_records(*data.emulated, cfg.schema);
  } else if (need_external) {
    throw ValidationError("the requested estimators need an external source (config key 'external')");
  }
  if (need_external && data.external.empty()) throw ValidationError("external sample is empty");
  return data;
}

std::string emulated_csv(const EmulatedSample& sample) {
  CsvTable table;
  table.header = sample.names;
  const auto m = static_cast<std::size_t>(sample.values.rows());
  table.rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::string> row;
    for (std::size_t k = 0; k < sample.names.size(); ++k) row.push_back(sample.label(i, k));
    table.rows.push_back(std::move(row));
  }
  return to_csv(table);
}

json ph_tests(const Ingested& trial, const RunConfig& cfg, CsvTable* table, bool strict) {
  const auto names = cfg.schema.expanded_names();
  json out = json::array();
  for (int arm : {1, 0}) {
    const Records recs = filter_arm(trial.records, arm);
    json entry = {{"arm", arm}};
    try {
      CoxOptions opts;
      opts.columns = varying_columns(recs);
      opts.column_names = names;
      const CoxFit fit = fit_cox(recs, CoxResponse::Event, opts);
      const PhTestResult test = schoenfeld_ph_test(fit, recs, cfg.ph_transform, names);
      json covs = json::array();
      for (std::size_t k = 0; k < test.covariate_labels.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        covs.push_back({{"covariate", test.covariate_labels[k]},
                        {"coefficient", fit.coefficients(ki)},
                        {"chisq", test.per_covariate_chisq(ki)},
                        {"p", test.per_covariate_p(ki)}});
        if (table)
          table->rows.push_back({std::to_string(arm), test.covariate_labels[k],
                                 format_number(test.per_covariate_chisq(ki)), "1",
                                 format_number(test.per_covariate_p(ki))});
      }
      if (table)
        table->rows.push_back({std::to_string(arm), "GLOBAL", format_number(test.global_chisq),
                               std::to_string(test.global_df), format_number(test.global_p)});
      entry["transform"] = test.time_transform_tag;
      entry["covariates"] = covs;
      entry["global"] = {{"chisq", test.global_chisq}, {"df", test.global_df}, {"p", test.global_p}};
    } catch (const Error& e) {
      if (strict) throw;
      entry["error"] = e.what();
    }
    out.push_back(entry);
  }
  return out;
}

json weights_summary(const WeightSet& w) {
  auto stats = [](const Eigen::VectorXd& v) {
    const double s = v.sum(), s2 = v.squaredNorm();
    return json{{"min", v.minCoeff()}, {"max", v.maxCoeff()}, {"ess", s2 > 0.0 ? s * s / s2 : 0.0}};
  };
  json out = {{"functions", w.function_names},
              {"target_moments", std::vector<double>(w.target_moments.data(),
                                                     w.target_moments.data() + w.target_moments.size())},
              {"lambda", std::vector<double>(w.dual_solution.data(), w.dual_solution.data() + w.dual_solution.size())},
              {"solver", {{"iterations", w.solver_diag.iterations},
                          {"constraint_residual", w.solver_diag.constraint_residual},
                          {"effective_sample_size", w.solver_diag.effective_sample_size}}},
              {"calibration_weights", stats(w.calib_weights)},
              {"propensity", stats(w.propensity)}};
  if (w.ipsw) {
    out["ipsw"] = stats(w.ipsw->weights);
    out["ipsw"]["min_trial_probability"] = w.ipsw->min_trial_probability;
    out["ipsw"]["extreme"] = w.ipsw->extreme;
    out["ipsw"]["warnings"] = w.ipsw->warnings;
  }
  return out;
}

std::string curve_csv(const CurvePair& curves) {
  CsvTable table;
  const bool bands = !curves.arms[0].lower.empty() && !curves.arms[1].lower.empty();
  table.header = {"time", "S0", "S1"};
  if (bands) table.header.insert(table.header.end(), {"S0_lower", "S0_upper", "S1_lower", "S1_upper"});
  const auto& times = curves.arms[0].times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<std::string> row{format_number(times[k]), format_number(curves.arms[0].values[k]),
                                 format_number(curves.arms[1].value_at(times[k]))};
    if (bands) {
      const auto& c1 = curves.arms[1];
      const std::size_t j = static_cast<std::size_t>(
          std::upper_bound(c1.times.begin(), c1.times.end(), times[k]) - c1.times.begin() - 1);
      row.insert(row.end(), {format_number(curves.arms[0].lower[k]), format_number(curves.arms[0].upper[k]),
                             format_number(c1.lower[j]), format_number(c1.upper[j])});
    }
    table.rows.push_back(std::move(row));
  }
  return to_csv(table);
}

void write_manifest(OutputSet& out, const std::string& command, const RunConfig& cfg) {
  json manifest = {{"version", kVersion},
                   {"command", command},
                   {"config", json::parse(cfg.echo)},
                   {"seed", cfg.seed},
                   {"bootstrap", cfg.bootstrap},
                   {"horizon", cfg.horizon},
                   {"files", out.files()}};
  if (cfg.arms) manifest["arms"] = {cfg.arms->first, cfg.arms->second};
  json tags = json::array();
  for (EstimatorTag t : cfg.estimators) tags.push_back(to_string(t));
  manifest["estimators"] = tags;
  write_text(out.dir() / "manifest.json", manifest.dump(2) + "\n");
}

int diagnose_ph(const RunConfig& cfg) {
  const Ingested trial = load_trial(cfg);
  OutputSet out(cfg.output_dir);
  CsvTable table;
  table.header = {"arm", "covariate", "chisq", "df", "p"};
  const json tests = ph_tests(trial, cfg, &table, true);
  out.write("ph_tests.csv", to_csv(table));
  out.write("ph_tests.json", json{{"ph_tests", tests}, {"ingest_messages", trial.report.messages}}.dump(2) + "\n");
  write_manifest(out, "diagnose-ph", cfg);
  return 0;
}

int emulate(const RunConfig& cfg) {
  if (!cfg.external_summary) throw ValidationError("emulate: the config needs an external 'summary' source");
  const Ingested trial = load_trial(cfg);
  json info;
  const EmulatedSample sample = emulate_external(*cfg.external_summary, cfg, trial, info);
  OutputSet out(cfg.output_dir);
  out.write("external_emulated.csv", emulated_csv(sample));
  out.write("emulation.json", info.dump(2) + "\n");
  write_manifest(out, "emulate", cfg);
  return 0;
}

int transport(RunConfig cfg, bool force_bootstrap) {
  if (force_bootstrap && cfg.bootstrap == 0) cfg.bootstrap = 200;
  const bool need_external = std::any_of(cfg.estimators.begin(), cfg.estimators.end(), needs_external);
  LoadedData data = load_data(cfg, need_external);
  const double max_time = std::max_element(data.trial.records.begin(), data.trial.records.end(),
                                           [](const SubjectRecord& a, const SubjectRecord& b) {
                                             return a.time < b.time;
                                           })->time;
  if (cfg.horizon > max_time)
    throw ValidationError("horizon " + format_number(cfg.horizon) + " exceeds the trial follow-up (" +
                          format_number(max_time) + ")");

  const PipelineConfig pc = pipeline_config(cfg);
  const Records external = need_external ? data.external : Records{};

  PipelineResult result = run_estimators(data.trial.records, external, pc, false);
  json boot_info = nullptr;
  if (cfg.bootstrap > 0) {
    BootstrapOptions bo;
    bo.replicates = cfg.bootstrap;
    bo.seed = cfg.seed;
    bo.threads = cfg.threads;
    bo.strict = false;
    const BootstrapResult boot = bootstrap(data.trial.records, external, pc, result, bo);
    attach_bootstrap(result, boot);
    boot_info = {{"replicates", boot.replicates}, {"seed", boot.seed}};
    json per = json::array();
    for (const auto& b : boot.estimators)
      per.push_back({{"estimator", to_string(b.tag)},
                     {"successful", b.tau.size()},
                     {"failures", b.failures},
                     {"failure", b.failure}});
    boot_info["estimators"] = per;
  }

  OutputSet out(cfg.output_dir);
  CsvTable tate;
  tate.header = {"estimator", "horizon", "tau", "se", "ci_lower", "ci_upper", "S1", "S0", "status"};
  json estimators = json::array();
  bool any_failed = false;
  for (const auto& e : result.estimates) {
    const std::string tag = to_string(e.tag);
    std::string status = "ok";
    if (!e.failure.empty()) {
      status = "failed: " + e.failure;
      any_failed = true;
    }
    double s1 = NAN, s0 = NAN;
    if (e.curves) {
      s1 = e.curves->arms[1].value_at(cfg.horizon);
      s0 = e.curves->arms[0].value_at(cfg.horizon);
    }
    tate.rows.push_back({tag, format_number(cfg.horizon), format_number(e.tate.tau), format_number(e.tate.std_error),
                         format_number(e.tate.ci_lower), format_number(e.tate.ci_upper), format_number(s1),
                         format_number(s0), status});
    json ej = {{"estimator", tag}, {"status", e.failure.empty() ? "ok" : "failed"}};
    if (!e.failure.empty()) ej["failure"] = e.failure;
    if (e.curves) ej["notes"] = e.curves->notes;
    estimators.push_back(ej);
  }
  out.write("tate.csv", to_csv(tate));
  for (const auto& e : result.estimates)
    if (e.curves) out.write("curves_" + to_string(e.tag) + ".csv", curve_csv(*e.curves));

  json diag = {{"ingest",
                {{"trial_rows", data.trial.report.rows},
                 {"trial_records", data.trial.report.records},
                 {"dropped", data.trial.report.dropped},
                 {"messages", data.trial.report.messages}}},
               {"external", data.external_info},
               {"ph_tests", ph_tests(data.trial, cfg, nullptr, false)},
               {"estimators", estimators},
               {"notes", result.notes},
               {"bootstrap", boot_info}};
  if (result.weights) diag["weights"] = weights_summary(*result.weights);
  json hare = json::object();
  for (int a = 0; a < 2; ++a)
    if (const auto& m = result.hare_models[static_cast<std::size_t>(a)])
      hare["arm" + std::to_string(a)] = json::parse(serialize_hare(std::get<HareFit>(*m)));
  if (!hare.empty()) diag["hare_models"] = hare;
  out.write("diagnostics.json", diag.dump(2) + "\n");
  write_manifest(out, force_bootstrap ? "bootstrap" : "transport", cfg);
  for (const auto& e : result.estimates)
    if (!e.failure.empty()) std::cerr << "survtransport: " << to_string(e.tag) << " failed: " << e.failure << "\n";
  return any_failed ? 2 : 0;
}

}  // namespace

int run_command(const CommandLine& cmd) {
  try {
    RunConfig cfg = load_run_config(cmd.config);
    apply_overrides(cfg, cmd);
    if (cmd.command == "diagnose-ph") return diagnose_ph(cfg);
    if (cmd.command == "emulate") return emulate(cfg);
    if (cmd.command == "transport") return transport(cfg, false);
    if (cmd.command == "bootstrap") return transport(cfg, true);
    throw ValidationError("unknown command '" + cmd.command + "'");
  } catch (const ValidationError& e) {
    std::cerr << "survtransport: error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "survtransport: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "survtransport: error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "survtransport: error: " << e.what() << "\n";
    return 1;
  }
}

Ingested load_trial(const RunConfig& cfg) { return load_trial_checked(cfg); }

EmulationSetup prepare_emulation(const ExternalSummaryConfig& src, const RunConfig& cfg, const Ingested& trial) {
  return setup_emulation(src, cfg, trial);
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig pc;
  pc.estimators = cfg.estimators;
  pc.estimation.horizon = cfg.horizon;
  pc.estimation.isotonize = cfg.isotonize;
  pc.estimation.ipcw_cap = cfg.ipcw_cap;
  pc.covariate_names = cfg.schema.expanded_names();
  if (!cfg.calibration.empty()) pc.weighting.calibration = parse_calibration(cfg.calibration, pc.covariate_names);
  pc.weighting.known_propensity = cfg.known_propensity;
  pc.outcome.hare = cfg.hare;
  pc.outcome.covariate_names = pc.covariate_names;
  return pc;
}

}  // namespace survtransport::cli
