#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "survtransport/emulation.hpp"
#include "survtransport/error.hpp"

namespace survtransport {

using nlohmann::json;

const VariableSummary* SummarySpec::find(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return &v;
  return nullptr;
}

void normalize_summary(SummarySpec& spec) {
  for (auto& v : spec.variables) {
    if (v.absent) continue;
    const std::string where = "summary '" + spec.population + "', variable '" + v.name + "': ";
    if (auto* cat = std::get_if<CategoricalMargin>(&v.margin)) {
      if (cat->levels.size() != cat->proportions.size() || cat->levels.empty())
        throw ValidationError(where + "levels and proportions must be non-empty and of equal length");
      for (double p : cat->proportions)
        if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError(where + "proportions must be non-negative");
      const double total = std::accumulate(cat->proportions.begin(), cat->proportions.end(), 0.0);
      if (total > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << where << "proportions sum to " << total << " > 1";
        throw ValidationError(msg.str());
      }
      if (total < 1.0 - 1e-9) {
        std::ostringstream msg;
        msg << where << "proportions sum to " << total << "; ";
        if (spec.policy == ProportionPolicy::Renormalize) {
          for (double& p : cat->proportions) p /= total;
          msg << "renormalized to 1";
        } else {
          cat->levels.push_back("unreported");
          cat->proportions.push_back(1.0 - total);
          msg << "remainder " << 1.0 - total << " assigned to level 'unreported'";
        }
        spec.notes.push_back(msg.str());
      }
    } else {
      const auto& c = std::get<ContinuousMargin>(v.margin);
      if (!(c.sd > 0.0) || !std::isfinite(c.mean)) throw ValidationError(where + "sd must be positive");
      if (c.lo && c.hi && !(*c.lo < c.mean && c.mean < *c.hi)) {
        std::ostringstream msg;
        msg << where << "mean " << c.mean << " not inside range (" << *c.lo << ", " << *c.hi << ")";
        throw ValidationError(msg.str());
      }
    }
  }
}

SummarySpec summary_spec_from_json(const std::string& text) {
  SummarySpec spec;
  try {
    const json in = json::parse(text);
    spec.population = in.value("population", std::string("external"));
    spec.m = in.at("m").get<std::size_t>();
    const std::string policy = in.value("proportion_policy", std::string("renormalize"));
    if (policy == "renormalize")
      spec.policy = ProportionPolicy::Renormalize;
    else if (policy == "unreported_level")
      spec.policy = ProportionPolicy::UnreportedLevel;
    else
      throw ValidationError("summary: proportion_policy must be 'renormalize' or 'unreported_level'");
    for (const auto& jv : in.at("variables")) {
      VariableSummary v;
      v.name = jv.at("name").get<std::string>();
      v.absent = jv.value("absent", false);
      if (v.absent) {
        spec.variables.push_back(std::move(v));
        continue;
      }
      const std::string type = jv.at("type").get<std::string>();
      if (type == "categorical") {
        CategoricalMargin c;
        c.levels = jv.at("levels").get<std::vector<std::string>>();
        c.proportions = jv.at("proportions").get<std::vector<double>>();
        c.ordinal = jv.value("ordinal", false);
        v.margin = std::move(c);
      } else if (type == "continuous") {
        ContinuousMargin c;
        c.mean = jv.at("mean").get<double>();
        c.sd = jv.at("sd").get<double>();
        if (jv.contains("lo")) c.lo = jv.at("lo").get<double>();
        if (jv.contains("hi")) c.hi = jv.at("hi").get<double>();
        v.margin = c;
      } else {
        throw ValidationError("summary: variable '" + v.name + "' has unknown type '" + type + "'");
      }
      spec.variables.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("summary: malformed JSON: ") + e.what());
  }
  normalize_summary(spec);
  return spec;
}

std::string summary_spec_to_json(const SummarySpec& spec) {
  json vars = json::array();
  for (const auto& v : spec.variables) {
    json jv{{"name", v.name}};
    if (v.absent) {
      jv["absent"] = true;
    } else if (const auto* cat = std::get_if<CategoricalMargin>(&v.margin)) {
      jv["type"] = "categorical";
      jv["levels"] = cat->levels;
      jv["proportions"] = cat->proportions;
      if (cat->ordinal) jv["ordinal"] = true;
    } else {
      const auto& c = std::get<ContinuousMargin>(v.margin);
      jv["type"] = "continuous";
      jv["mean"] = c.mean;
      jv["sd"] = c.sd;
      if (c.lo) jv["lo"] = *c.lo;
      if (c.hi) jv["hi"] = *c.hi;
    }
    vars.push_back(std::move(jv));
  }
  json out{{"population", spec.population},
           {"m", spec.m},
           {"proportion_policy", spec.policy == ProportionPolicy::Renormalize ? "renormalize" : "unreported_level"},
           {"variables", std::move(vars)}};
  return out.dump(2);
}

void fill_ranges(SummarySpec& spec,
                 const std::function<std::optional<std::pair<double, double>>(const std::string&)>& trial_range) {
  for (auto& v : spec.variables) {
    auto* c = std::get_if<ContinuousMargin>(&v.margin);
    if (v.absent || !c || (c->lo && c->hi)) continue;
    const auto range = trial_range(v.name);
    if (!range) continue;
    if (!c->lo) c->lo = range->first;
    if (!c->hi) c->hi = range->second;
    spec.notes.push_back("range of '" + v.name + "' taken from the trial: [" + std::to_string(*c->lo) + ", " +
                         std::to_string(*c->hi) + "]");
  }
  normalize_summary(spec);
}

}  // namespace survtransport
