#pragma once

#include "dynrec/model.hpp"
#include "dynrec/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dynrec {

// Distribution of the end-of-monitoring time tau; independent of the model.
struct CensoringDist {
  enum class Kind { Fixed, Uniform, Exponential };
  Kind kind = Kind::Fixed;
  double lower = 0.0;
  double upper = 0.0;
  double rate = 0.0;

  // tau = s_star.
  static CensoringDist fixed() { return {}; }
  static CensoringDist uniform(double lower, double upper);
  static CensoringDist exponential(double rate);

  double draw(Rng& rng, double s_star) const;
  // E[min(tau, s_star)].
  double mean_window(double s_star) const;
};

// Covariate paths with entries Uniform(lower, upper), redrawn at each change
// time. No change times gives time-constant covariates.
struct CovariateGenerator {
  int dimension = 0;
  double lower = -1.0;
  double upper = 1.0;
  std::vector<double> change_times;

  CovariatePath draw(Rng& rng) const;
};

// How the effective age restarts after each event.
struct AgePolicy {
  enum class Kind { Perfect, Minimal, Partial };
  Kind kind = Kind::Perfect;
  // For Partial: age after an event = retain * age just before it.
  double retain = 0.0;

  static AgePolicy perfect() { return {Kind::Perfect, 0.0}; }
  static AgePolicy minimal() { return {Kind::Minimal, 0.0}; }
  static AgePolicy partial(double retain);
};

struct SimConfig {
  ModelParams params;
  CensoringDist censoring;
  CovariateGenerator covariates;
  AgePolicy age;
  double s_star = 1.0;
  std::uint64_t seed = 0;
  int max_events_per_unit = 10000;

  void validate() const;
};

// Smallest s > current_time with
//   int_{current}^{s} lambda0(E(v)) kappa(v; eta) dv = exp_draw
// on the unit's open (last) segment, or nullopt when the cumulative intensity
// up to min(tau, s_star) stays below exp_draw.
std::optional<double> next_event_time(const UnitPath& unit, double current_time,
                                      const ModelParams& params, double exp_draw);

UnitPath draw_unit(const SimConfig& config, Rng& rng);
// Unit i uses substream (config.seed, i), so the cohort does not depend on
// evaluation order.
Cohort draw_cohort(int n, const SimConfig& config);

}  // namespace dynrec
