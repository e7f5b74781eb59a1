#pragma once

#include "dynrec/families.hpp"
#include "dynrec/step_function.hpp"

#include <Eigen/Dense>

#include <optional>
#include <variant>
#include <vector>

namespace dynrec {

// Effective age on one inter-event segment (S_{j-1}, S_j]:
//   E(v) = start_age + slope * (v - S_{j-1}).
struct AgeSegment {
  double start_age = 0.0;
  double slope = 1.0;

  bool operator==(const AgeSegment&) const = default;
};

enum class RepairPolicy { Perfect, Minimal, PiecewiseLinear };

struct EffectiveAgeSpec {
  RepairPolicy policy = RepairPolicy::Perfect;
  // One entry per segment, only for PiecewiseLinear.
  std::vector<AgeSegment> segments;

  static EffectiveAgeSpec perfect() { return {RepairPolicy::Perfect, {}}; }
  static EffectiveAgeSpec minimal() { return {RepairPolicy::Minimal, {}}; }
  static EffectiveAgeSpec piecewise(std::vector<AgeSegment> segments) {
    return {RepairPolicy::PiecewiseLinear, std::move(segments)};
  }

  bool operator==(const EffectiveAgeSpec&) const = default;
};

// Piecewise-constant covariate path, evaluated left-continuously:
// X(s) = values[k] for s in (times[k], times[k+1]], with X(0) = values[0].
class CovariatePath {
 public:
  CovariatePath() = default;
  CovariatePath(std::vector<double> times, std::vector<Eigen::VectorXd> values);
  static CovariatePath constant(Eigen::VectorXd value);
  static CovariatePath none() { return constant(Eigen::VectorXd(0)); }

  int dimension() const { return dimension_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& values() const { return values_; }

  // Left-continuous value at s.
  const Eigen::VectorXd& at(double s) const;
  // Index of the value in force on (a, a + epsilon).
  std::size_t index_after(double a) const;

  bool operator==(const CovariatePath& other) const;

 private:
  int dimension_ = 0;
  std::vector<double> times_{0.0};
  std::vector<Eigen::VectorXd> values_{Eigen::VectorXd(0)};
};

// One observed unit D = (N, Y, E, X) over [0, s_star]; observation ends at
// min(tau, s_star).
struct UnitPath {
  std::vector<double> event_times;
  double tau = 0.0;
  double s_star = 0.0;
  EffectiveAgeSpec age;
  CovariatePath covariates = CovariatePath::none();

  double end() const { return tau < s_star ? tau : s_star; }
  int event_count() const { return static_cast<int>(event_times.size()); }
  // Number of events strictly before s, i.e. N(s-).
  int events_before(double s) const;

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  bool operator==(const UnitPath&) const = default;
};

struct Cohort {
  std::vector<UnitPath> units;
  // Upper end of the effective-age window; defaults to the largest observed
  // event age when unset.
  std::optional<double> t_star;

  int size() const { return static_cast<int>(units.size()); }
  double s_star() const;
  int covariate_dim() const;
  void validate() const;

  bool operator==(const Cohort&) const = default;
};

// Parametric baseline hazard used for simulation and for exact compensators.
class BaselineHazard {
 public:
  enum class Kind { Constant, Weibull };

  static BaselineHazard constant(double rate);
  // Lambda0(t) = (t / scale)^shape.
  static BaselineHazard weibull(double shape, double scale);

  Kind kind() const { return kind_; }
  double rate() const { return rate_; }
  double shape() const { return shape_; }
  double scale() const { return scale_; }

  double hazard(double t) const;
  double cumulative(double t) const;
  // Smallest t with cumulative(t) = u.
  double inverse_cumulative(double u) const;

  bool operator==(const BaselineHazard&) const = default;

 private:
  Kind kind_ = Kind::Constant;
  double rate_ = 0.0;
  double shape_ = 1.0;
  double scale_ = 1.0;
};

// Either a hazard function or a fitted cumulative step function.
using Baseline = std::variant<BaselineHazard, StepFunction>;

double cumulative_baseline(const Baseline& baseline, double t);

struct ModelParams {
  Baseline baseline = BaselineHazard::constant(1.0);
  KappaModel kappa;
  Eta eta;
};

}  // namespace dynrec
