#include "dynrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dynrec {

CovariatePath::CovariatePath(std::vector<double> times,
                             std::vector<Eigen::VectorXd> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size()) {
    throw std::invalid_argument("CovariatePath: need one value per step time");
  }
  if (times_.front() != 0.0) {
    throw std::invalid_argument("CovariatePath: first step time must be 0");
  }
  dimension_ = static_cast<int>(values_.front().size());
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (k > 0 && !(times_[k] > times_[k - 1])) {
      throw std::invalid_argument("CovariatePath: step times must be strictly increasing");
    }
    if (values_[k].size() != dimension_) {
      throw std::invalid_argument("CovariatePath: inconsistent dimension");
    }
    if (!values_[k].allFinite()) {
      throw std::invalid_argument("CovariatePath: non-finite covariate value");
    }
  }
}

CovariatePath CovariatePath::constant(Eigen::VectorXd value) {
  return CovariatePath({0.0}, {std::move(value)});
}

std::size_t CovariatePath::index_after(double a) const {
  // last k with times[k] <= a
  auto it = std::upper_bound(times_.begin(), times_.end(), a);
  if (it == times_.begin()) return 0;
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

const Eigen::VectorXd& CovariatePath::at(double s) const {
  // last k with times[k] < s; k = 0 when s <= times[1]
  auto it = std::lower_bound(times_.begin() + 1, times_.end(), s);
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

bool CovariatePath::operator==(const CovariatePath& other) const {
  if (dimension_ != other.dimension_ || times_ != other.times_ ||
      values_.size() != other.values_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (values_[k] != other.values_[k]) return false;
  }
  return true;
}

int UnitPath::events_before(double s) const {
  return static_cast<int>(
      std::lower_bound(event_times.begin(), event_times.end(), s) -
      event_times.begin());
}

void UnitPath::validate() const {
  if (!(std::isfinite(s_star) && s_star > 0.0)) {
    throw std::invalid_argument("UnitPath: s_star must be finite and positive");
  }
  if (!(std::isfinite(tau) && tau > 0.0)) {
    throw std::invalid_argument("UnitPath: tau must be finite and positive");
  }
  const double stop = end();
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    const double s = event_times[j];
    if (!(std::isfinite(s) && s > 0.0)) {
      throw std::invalid_argument("UnitPath: event times must be positive");
    }
    if (j > 0 && !(s > event_times[j - 1])) {
      throw std::invalid_argument("UnitPath: event times must be strictly increasing");
    }
    if (!(s < stop)) {
      throw std::invalid_argument("UnitPath: event at or after end of observation");
    }
  }
  if (age.policy == RepairPolicy::PiecewiseLinear) {
    if (age.segments.size() != event_times.size() + 1) {
      throw std::invalid_argument(
          "UnitPath: piecewise age needs one segment per inter-event interval (" +
          std::to_string(event_times.size() + 1) + ")");
    }
    const double tol = 1e-12;
    double prev = 0.0;
    for (std::size_t j = 0; j < age.segments.size(); ++j) {
      const AgeSegment& seg = age.segments[j];
      const double hi = j < event_times.size() ? event_times[j] : stop;
      if (!(std::isfinite(seg.start_age) && seg.start_age >= 0.0)) {
        throw std::invalid_argument("UnitPath: start_age must be nonnegative");
      }
      if (!(std::isfinite(seg.slope) && seg.slope >= 0.0)) {
        throw std::invalid_argument("UnitPath: age slope must be nonnegative");
      }
      // E(v) <= v on the segment; linear, so endpoints suffice.
      if (seg.start_age > prev * (1.0 + tol) + tol ||
          seg.start_age + seg.slope * (hi - prev) > hi * (1.0 + tol) + tol) {
        throw std::invalid_argument("UnitPath: effective age exceeds calendar time");
      }
      prev = hi;
    }
  }
}

double Cohort::s_star() const {
  if (units.empty()) throw std::invalid_argument("Cohort: empty");
  return units.front().s_star;
}

int Cohort::covariate_dim() const {
  if (units.empty()) return 0;
  return units.front().covariates.dimension();
}

void Cohort::validate() const {
  if (units.empty()) throw std::invalid_argument("Cohort: needs at least one unit");
  const double s = units.front().s_star;
  const int p = units.front().covariates.dimension();
  for (const UnitPath& u : units) {
    u.validate();
    if (u.s_star != s) throw std::invalid_argument("Cohort: units must share s_star");
    if (u.covariates.dimension() != p) {
      throw std::invalid_argument("Cohort: units must share covariate dimension");
    }
  }
  if (t_star && !(std::isfinite(*t_star) && *t_star > 0.0)) {
    throw std::invalid_argument("Cohort: t_star must be positive");
  }
}

BaselineHazard BaselineHazard::constant(double rate) {
  if (!(std::isfinite(rate) && rate >= 0.0)) {
    throw std::invalid_argument("BaselineHazard: rate must be finite and nonnegative");
  }
  BaselineHazard b;
  b.kind_ = Kind::Constant;
  b.rate_ = rate;
  return b;
}

BaselineHazard BaselineHazard::weibull(double shape, double scale) {
  if (!(std::isfinite(shape) && shape > 0.0 && std::isfinite(scale) && scale > 0.0)) {
    throw std::invalid_argument("BaselineHazard: Weibull shape and scale must be positive");
  }
  BaselineHazard b;
  b.kind_ = Kind::Weibull;
  b.shape_ = shape;
  b.scale_ = scale;
  return b;
}

double BaselineHazard::hazard(double t) const {
  if (kind_ == Kind::Constant) return rate_;
  if (t <= 0.0) {
    if (shape_ < 1.0) return std::numeric_limits<double>::infinity();
    return shape_ == 1.0 ? 1.0 / scale_ : 0.0;
  }
  return shape_ / scale_ * std::pow(t / scale_, shape_ - 1.0);
}

double BaselineHazard::cumulative(double t) const {
  if (t <= 0.0) return 0.0;
  if (kind_ == Kind::Constant) return rate_ * t;
  return std::pow(t / scale_, shape_);
}

double BaselineHazard::inverse_cumulative(double u) const {
  if (u <= 0.0) return 0.0;
  if (kind_ == Kind::Constant) {
    return rate_ > 0.0 ? u / rate_ : std::numeric_limits<double>::infinity();
  }
  return scale_ * std::pow(u, 1.0 / shape_);
}

double cumulative_baseline(const Baseline& baseline, double t) {
  if (const auto* h = std::get_if<BaselineHazard>(&baseline)) return h->cumulative(t);
  return std::get<StepFunction>(baseline)(t);
}

}  // namespace dynrec
