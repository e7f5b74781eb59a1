#pragma once

#include <span>
#include <utility>
#include <vector>

namespace dynrec {

// Right-continuous step function: value(t) = initial + sum of jumps at
// locations <= t. Locations are strictly increasing.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> locations, std::vector<double> jumps,
               double initial_value = 0.0);

  // Builds from unsorted (location, jump) pairs; equal locations are merged
  // by summing their jumps.
  static StepFunction from_jumps(std::vector<std::pair<double, double>> jumps,
                                 double initial_value = 0.0);

  // Builds from cumulative values at each location; stores the values as
  // given so no rounding accumulates through the jumps.
  static StepFunction from_values(std::vector<double> locations,
                                  std::vector<double> values,
                                  double initial_value = 0.0);

  double operator()(double t) const;
  double left_limit(double t) const;
  double jump_at(double t) const;

  std::span<const double> locations() const { return locations_; }
  std::span<const double> jumps() const { return jumps_; }
  // Cumulative values right at each jump location.
  std::span<const double> values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }

  bool operator==(const StepFunction&) const = default;

 private:
  std::vector<double> locations_;
  std::vector<double> jumps_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

}  // namespace dynrec
