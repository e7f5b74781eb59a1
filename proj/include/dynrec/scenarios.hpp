#pragma once

// Named simulation presets and a JSON scenario format.

#include "dynrec/simulate.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dynrec {

struct Scenario {
  std::string name;
  SimConfig sim;
  // Effective-age window used when fitting the scenario's cohorts.
  std::optional<double> t_star;
  // Ages at which bands and process proxies are reported.
  std::vector<double> grid;
};

std::vector<std::string> scenario_names();
// Throws std::invalid_argument for an unknown name.
Scenario scenario_preset(const std::string& name);

// {"name", "s_star", "t_star", "grid", "baseline": {"kind": "constant"|"weibull",
//  "rate"|"shape","scale"}, "rho", "link", "alpha": [...], "beta": [...],
//  "censoring": {"kind": "fixed"|"uniform"|"exponential", ...},
//  "covariates": {"dimension", "lower", "upper", "change_times"},
//  "age": {"policy": "perfect"|"minimal"|"partial", "retain"},
//  "max_events_per_unit"}
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

// A preset name, else a path to a JSON scenario file.
Scenario load_scenario(const std::string& name_or_path);

}  // namespace dynrec
