#include "json.hpp"

#include "survtransport/error.hpp"
#include "survtransport/hare.hpp"

namespace survtransport {

namespace {

using nlohmann::json;

const char* kind_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::CovariateLinear: return "covariate_linear";
    case FactorKind::CovariateKnot: return "covariate_knot";
    case FactorKind::TimeLinear: return "time_linear";
    case FactorKind::TimeKnot: return "time_knot";
  }
  return "";
}

FactorKind parse_kind(const std::string& s) {
  if (s == "covariate_linear") return FactorKind::CovariateLinear;
  if (s == "covariate_knot") return FactorKind::CovariateKnot;
  if (s == "time_linear") return FactorKind::TimeLinear;
  if (s == "time_knot") return FactorKind::TimeKnot;
  throw ValidationError("HARE model: unknown factor kind '" + s + "'");
}

}  // namespace

std::string serialize_hare(const HareFit& fit) {
  json terms = json::array();
  for (std::size_t k = 0; k < fit.basis.size(); ++k) {
    const HareTerm& term = fit.basis.terms[k];
    json factors = json::array();
    for (const auto& f : term.factors) {
      json jf{{"kind", kind_name(f.kind)}};
      if (!f.is_time()) jf["column"] = f.column;
      if (f.kind == FactorKind::CovariateKnot || f.kind == FactorKind::TimeKnot) jf["knot"] = f.knot;
      factors.push_back(std::move(jf));
    }
    terms.push_back({{"label", term.label(fit.covariate_names)},
                     {"factors", std::move(factors)},
                     {"coefficient", fit.coefficients(static_cast<Eigen::Index>(k))}});
  }
  json trace = json::array();
  for (const auto& s : fit.selection_trace)
    trace.push_back({{"action", s.action},
                     {"term", s.term},
                     {"n_terms", s.n_terms},
                     {"log_likelihood", s.log_likelihood},
                     {"aic", s.aic},
                     {"criterion", s.criterion}});
  json out{{"terms", std::move(terms)},
           {"covariate_names", fit.covariate_names},
           {"log_likelihood", fit.log_likelihood},
           {"aic", fit.aic},
           {"criterion", fit.criterion},
           {"penalty", fit.penalty},
           {"n_events", fit.n_events},
           {"n_records", fit.n_records},
           {"iterations", fit.iterations},
           {"selection_trace", std::move(trace)}};
  return out.dump(2);
}

HareFit deserialize_hare(const std::string& text) {
  HareFit fit;
  try {
    const json in = json::parse(text);
    const auto& terms = in.at("terms");
    fit.coefficients.resize(static_cast<Eigen::Index>(terms.size()));
    for (std::size_t k = 0; k < terms.size(); ++k) {
      HareTerm term;
      for (const auto& jf : terms[k].at("factors")) {
        HareFactor f;
        f.kind = parse_kind(jf.at("kind").get<std::string>());
        f.column = jf.value("column", std::size_t{0});
        f.knot = jf.value("knot", 0.0);
        term.factors.push_back(f);
      }
      fit.basis.terms.push_back(std::move(term));
      fit.coefficients(static_cast<Eigen::Index>(k)) = terms[k].at("coefficient").get<double>();
    }
    fit.covariate_names = in.value("covariate_names", std::vector<std::string>{});
    fit.log_likelihood = in.value("log_likelihood", 0.0);
    fit.aic = in.value("aic", 0.0);
    fit.criterion = in.value("criterion", 0.0);
    fit.penalty = in.value("penalty", 2.0);
    fit.n_events = in.value("n_events", std::size_t{0});
    fit.n_records = in.value("n_records", std::size_t{0});
    fit.iterations = in.value("iterations", 0);
    for (const auto& s : in.value("selection_trace", json::array()))
      fit.selection_trace.push_back({s.at("action"), s.at("term"), s.at("n_terms"), s.at("log_likelihood"),
                                     s.at("aic"), s.at("criterion")});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("HARE model: malformed JSON: ") + e.what());
  }
  fit.converged = true;
  return fit;
}

}  // namespace survtransport
