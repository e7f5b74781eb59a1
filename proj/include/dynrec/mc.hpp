#pragma once

// Monte Carlo harness: randomized identity checks and replication studies of
// the estimators' large-sample behaviour, with JSON reports.

#include "dynrec/scenarios.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace dynrec {

struct StudyConfig {
  Scenario scenario;
  std::vector<int> sample_sizes{50, 200, 800};
  int replications = 200;
  std::uint64_t seed = 1;
  double level = 0.95;

  // Median error ratio per 4x increase in n.
  double rate_lo = 0.35;
  double rate_hi = 0.65;
  double coverage_lo = 0.92;
  double coverage_hi = 0.975;
  // KS threshold ks_coef / sqrt(reps) + ks_slack.
  double ks_coef = 1.36;
  double ks_slack = 0.05;
  // Correlation threshold corr_coef / sqrt(reps).
  double corr_coef = 3.0;
  double variance_tol = 0.15;
  double max_nonconverged = 0.02;
  // Probe: coverage against eta0 + shift_se * SE must stay below this.
  double shift_se = 5.0;
  double shift_max_coverage = 0.5;
  // Martingale check: |mean| <= martingale_z * SE at martingale_points ages.
  double martingale_z = 3.0;
  int martingale_points = 20;

  // Throws std::invalid_argument.
  void validate() const;
};

struct Check {
  std::string name;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool passed = false;
};

struct McReport {
  std::string study;
  nlohmann::json config;
  nlohmann::json aggregates = nlohmann::json::object();
  nlohmann::json records = nlohmann::json::array();
  std::vector<Check> checks;
  int attempted = 0;
  int nonconverged = 0;
  // Set when the study refused to run.
  std::string error;

  bool passed() const;
  nlohmann::json to_json() const;
  // One line per check.
  std::string summary() const;
};

// Randomized fixtures checking the compensator representation, the change
// of variable for martingale integrals, the S0 ratio identities and the
// score and Hessian against finite differences.
McReport identity_suite(std::uint64_t seed, int fixtures = 100);

// Mean of M(s*, t) over one cohort of sample_sizes.back() units under the
// true parameters.
McReport martingale_study(const StudyConfig& config);
McReport consistency_study(const StudyConfig& config);
McReport coverage_study(const StudyConfig& config, double level);
McReport normality_study(const StudyConfig& config);
// Sampling covariance of sqrt(n)(eta_hat - eta0) against mean sigma_hat^{-1},
// and pointwise variance of sqrt(n)(Lambda0_hat - Lambda0) against mean c_hat.
McReport variance_study(const StudyConfig& config);

}  // namespace dynrec
