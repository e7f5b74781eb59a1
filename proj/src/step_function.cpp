#include "dynrec/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynrec {

StepFunction::StepFunction(std::vector<double> locations,
                           std::vector<double> jumps, double initial_value)
    : locations_(std::move(locations)),
      jumps_(std::move(jumps)),
      initial_(initial_value) {
  if (locations_.size() != jumps_.size()) {
    throw std::invalid_argument("StepFunction: locations/jumps size mismatch");
  }
  if (!std::isfinite(initial_)) {
    throw std::invalid_argument("StepFunction: non-finite initial value");
  }
  values_.resize(locations_.size());
  double acc = initial_;
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    if (!std::isfinite(locations_[i]) || !std::isfinite(jumps_[i])) {
      throw std::invalid_argument("StepFunction: non-finite entry");
    }
    if (i > 0 && !(locations_[i] > locations_[i - 1])) {
      throw std::invalid_argument(
          "StepFunction: locations must be strictly increasing");
    }
    acc += jumps_[i];
    values_[i] = acc;
  }
}

StepFunction StepFunction::from_jumps(
    std::vector<std::pair<double, double>> jumps, double initial_value) {
  std::stable_sort(jumps.begin(), jumps.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> loc;
  std::vector<double> size;
  for (const auto& [where, amount] : jumps) {
    if (!loc.empty() && loc.back() == where) {
      size.back() += amount;
    } else {
      loc.push_back(where);
      size.push_back(amount);
    }
  }
  return StepFunction(std::move(loc), std::move(size), initial_value);
}

StepFunction StepFunction::from_values(std::vector<double> locations,
                                       std::vector<double> values,
                                       double initial_value) {
  if (locations.size() != values.size()) {
    throw std::invalid_argument("StepFunction: locations/values size mismatch");
  }
  std::vector<double> jumps(values.size());
  double prev = initial_value;
  for (std::size_t i = 0; i < values.size(); ++i) {
    jumps[i] = values[i] - prev;
    prev = values[i];
  }
  StepFunction f(std::move(locations), std::move(jumps), initial_value);
  f.values_ = std::move(values);
  return f;
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(locations_.begin(), locations_.end(), t);
  if (it == locations_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - locations_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(locations_.begin(), locations_.end(), t);
  if (it == locations_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - locations_.begin()) - 1];
}

double StepFunction::jump_at(double t) const {
  auto it = std::lower_bound(locations_.begin(), locations_.end(), t);
  if (it == locations_.end() || *it != t) return 0.0;
  return jumps_[static_cast<std::size_t>(it - locations_.begin())];
}

}  // namespace dynrec
