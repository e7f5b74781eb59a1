#include "dynrec/scenarios.hpp"

#include <fstream>
#include <stdexcept>

namespace dynrec {

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Scenario make(std::string name, BaselineHazard baseline, KappaModel kappa, Eta eta,
              CensoringDist censoring, int covariate_dim, AgePolicy age, double s_star,
              std::optional<double> t_star, std::vector<double> grid) {
  Scenario sc;
  sc.name = std::move(name);
  sc.sim.params = {baseline, std::move(kappa), std::move(eta)};
  sc.sim.censoring = censoring;
  sc.sim.covariates.dimension = covariate_dim;
  sc.sim.age = age;
  sc.sim.s_star = s_star;
  sc.t_star = t_star;
  sc.grid = std::move(grid);
  return sc;
}

const std::vector<double> study_grid{0.2, 0.4, 0.6, 0.8, 1.0};

}  // namespace

std::vector<std::string> scenario_names() {
  return {"hpp", "renewal-weibull", "cox-reduction", "power-count", "partial-repair"};
}

Scenario scenario_preset(const std::string& name) {
  const KappaModel none{RhoFamily::identity(), LinkFamily::identity()};
  if (name == "hpp") {
    return make(name, BaselineHazard::constant(2.0), none, Eta::zeros(0, 0),
                CensoringDist::uniform(1.0, 3.0), 0, AgePolicy::perfect(), 3.0, 0.8,
                study_grid);
  }
  if (name == "renewal-weibull") {
    return make(name, BaselineHazard::weibull(2.0, 1.0), none, Eta::zeros(0, 0),
                CensoringDist::uniform(2.0, 4.0), 0, AgePolicy::perfect(), 4.0, 1.5,
                {0.3, 0.6, 0.9, 1.2, 1.5});
  }
  if (name == "cox-reduction") {
    return make(name, BaselineHazard::constant(1.0),
                {RhoFamily::identity(), LinkFamily::exponential()}, {vec({}), vec({0.5})},
                CensoringDist::uniform(1.0, 3.0), 1, AgePolicy::minimal(), 3.0, 2.0,
                {0.4, 0.8, 1.2, 1.6, 2.0});
  }
  if (name == "power-count") {
    return make(name, BaselineHazard::constant(1.0),
                {RhoFamily::power_count(), LinkFamily::exponential()},
                {vec({0.8}), vec({0.5})}, CensoringDist::uniform(1.5, 3.0), 1,
                AgePolicy::perfect(), 3.0, 1.0, study_grid);
  }
  if (name == "partial-repair") {
    return make(name, BaselineHazard::weibull(2.0, 1.0),
                {RhoFamily::power_count(), LinkFamily::exponential()},
                {vec({0.8}), vec({0.5})}, CensoringDist::uniform(1.5, 3.0), 1,
                AgePolicy::partial(0.5), 3.0, 1.0, study_grid);
  }
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  Scenario sc;
  sc.name = doc.value("name", std::string("custom"));
  SimConfig& sim = sc.sim;
  sim.s_star = doc.at("s_star").get<double>();
  if (doc.contains("t_star")) sc.t_star = doc.at("t_star").get<double>();
  if (doc.contains("grid")) sc.grid = doc.at("grid").get<std::vector<double>>();

  const auto& b = doc.at("baseline");
  const std::string bkind = b.at("kind").get<std::string>();
  if (bkind == "constant") {
    sim.params.baseline = BaselineHazard::constant(b.at("rate").get<double>());
  } else if (bkind == "weibull") {
    sim.params.baseline =
        BaselineHazard::weibull(b.at("shape").get<double>(), b.at("scale").get<double>());
  } else {
    throw std::invalid_argument("unknown baseline kind '" + bkind + "'");
  }

  sim.params.kappa = {rho_from_name(doc.value("rho", std::string("identity"))),
                      link_from_name(doc.value("link", std::string("none")))};
  sim.params.eta.alpha = vec(doc.value("alpha", std::vector<double>{}));
  sim.params.eta.beta = vec(doc.value("beta", std::vector<double>{}));

  if (doc.contains("censoring")) {
    const auto& c = doc.at("censoring");
    const std::string ckind = c.at("kind").get<std::string>();
    if (ckind == "fixed") {
      sim.censoring = CensoringDist::fixed();
    } else if (ckind == "uniform") {
      sim.censoring =
          CensoringDist::uniform(c.at("lower").get<double>(), c.at("upper").get<double>());
    } else if (ckind == "exponential") {
      sim.censoring = CensoringDist::exponential(c.at("rate").get<double>());
    } else {
      throw std::invalid_argument("unknown censoring kind '" + ckind + "'");
    }
  }
  if (doc.contains("covariates")) {
    const auto& c = doc.at("covariates");
    sim.covariates.dimension = c.value("dimension", 0);
    sim.covariates.lower = c.value("lower", -1.0);
    sim.covariates.upper = c.value("upper", 1.0);
    sim.covariates.change_times = c.value("change_times", std::vector<double>{});
  }
  if (doc.contains("age")) {
    const auto& a = doc.at("age");
    const std::string policy = a.at("policy").get<std::string>();
    if (policy == "perfect") {
      sim.age = AgePolicy::perfect();
    } else if (policy == "minimal") {
      sim.age = AgePolicy::minimal();
    } else if (policy == "partial") {
      sim.age = AgePolicy::partial(a.at("retain").get<double>());
    } else {
      throw std::invalid_argument("unknown age policy '" + policy + "'");
    }
  }
  sim.max_events_per_unit = doc.value("max_events_per_unit", 10000);
  sim.validate();
  return sc;
}

nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json doc;
  const SimConfig& sim = sc.sim;
  doc["name"] = sc.name;
  doc["s_star"] = sim.s_star;
  if (sc.t_star) doc["t_star"] = *sc.t_star;
  doc["grid"] = sc.grid;
  const auto& base = std::get<BaselineHazard>(sim.params.baseline);
  if (base.kind() == BaselineHazard::Kind::Constant) {
    doc["baseline"] = {{"kind", "constant"}, {"rate", base.rate()}};
  } else {
    doc["baseline"] = {{"kind", "weibull"}, {"shape", base.shape()}, {"scale", base.scale()}};
  }
  doc["rho"] = sim.params.kappa.rho.name();
  doc["link"] = std::string(sim.params.kappa.link.name());
  doc["alpha"] = to_std(sim.params.eta.alpha);
  doc["beta"] = to_std(sim.params.eta.beta);
  switch (sim.censoring.kind) {
    case CensoringDist::Kind::Fixed:
      doc["censoring"] = {{"kind", "fixed"}};
      break;
    case CensoringDist::Kind::Uniform:
      doc["censoring"] = {{"kind", "uniform"},
                          {"lower", sim.censoring.lower},
                          {"upper", sim.censoring.upper}};
      break;
    case CensoringDist::Kind::Exponential:
      doc["censoring"] = {{"kind", "exponential"}, {"rate", sim.censoring.rate}};
      break;
  }
  doc["covariates"] = {{"dimension", sim.covariates.dimension},
                       {"lower", sim.covariates.lower},
                       {"upper", sim.covariates.upper},
                       {"change_times", sim.covariates.change_times}};
  switch (sim.age.kind) {
    case AgePolicy::Kind::Perfect:
      doc["age"] = {{"policy", "perfect"}};
      break;
    case AgePolicy::Kind::Minimal:
      doc["age"] = {{"policy", "minimal"}};
      break;
    case AgePolicy::Kind::Partial:
      doc["age"] = {{"policy", "partial"}, {"retain", sim.age.retain}};
      break;
  }
  doc["max_events_per_unit"] = sim.max_events_per_unit;
  return doc;
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const std::string& n : scenario_names()) {
    if (n == name_or_path) return scenario_preset(n);
  }
  std::ifstream in(name_or_path);
  if (!in) {
    throw std::invalid_argument("'" + name_or_path +
                                "' is neither a scenario preset nor a readable file");
  }
  try {
    return scenario_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(name_or_path + ": " + e.what());
  }
}

}  // namespace dynrec
