#include "dynrec/simulate.hpp"

#include "dynrec/errors.hpp"
#include "dynrec/parallel.hpp"
#include "dynrec/process.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dynrec {

CensoringDist CensoringDist::uniform(double lower, double upper) {
  if (!(lower > 0.0 && upper > lower && std::isfinite(upper))) {
    throw std::invalid_argument("uniform censoring needs 0 < lower < upper");
  }
  CensoringDist d;
  d.kind = Kind::Uniform;
  d.lower = lower;
  d.upper = upper;
  return d;
}

CensoringDist CensoringDist::exponential(double rate) {
  if (!(rate > 0.0 && std::isfinite(rate))) {
    throw std::invalid_argument("exponential censoring needs a positive rate");
  }
  CensoringDist d;
  d.kind = Kind::Exponential;
  d.rate = rate;
  return d;
}

double CensoringDist::draw(Rng& rng, double s_star) const {
  switch (kind) {
    case Kind::Fixed:
      return s_star;
    case Kind::Uniform:
      return rng.uniform(lower, upper);
    case Kind::Exponential:
      return rng.exponential() / rate;
  }
  return s_star;
}

double CensoringDist::mean_window(double s_star) const {
  switch (kind) {
    case Kind::Fixed:
      return s_star;
    case Kind::Uniform:
      if (upper <= s_star) return 0.5 * (lower + upper);
      if (lower >= s_star) return s_star;
      return (0.5 * (s_star * s_star - lower * lower) + s_star * (upper - s_star)) /
             (upper - lower);
    case Kind::Exponential:
      return -std::expm1(-rate * s_star) / rate;
  }
  return s_star;
}

CovariatePath CovariateGenerator::draw(Rng& rng) const {
  std::vector<double> times{0.0};
  times.insert(times.end(), change_times.begin(), change_times.end());
  std::vector<Eigen::VectorXd> values;
  values.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    Eigen::VectorXd x(dimension);
    for (int d = 0; d < dimension; ++d) x[d] = rng.uniform(lower, upper);
    values.push_back(std::move(x));
  }
  return CovariatePath(std::move(times), std::move(values));
}

AgePolicy AgePolicy::partial(double retain) {
  if (!(retain >= 0.0 && retain <= 1.0)) {
    throw std::invalid_argument("partial repair needs retain in [0, 1]");
  }
  return {Kind::Partial, retain};
}

void SimConfig::validate() const {
  if (!std::holds_alternative<BaselineHazard>(params.baseline)) {
    throw std::invalid_argument("simulation needs a hazard-function baseline");
  }
  if (!(s_star > 0.0 && std::isfinite(s_star))) {
    throw std::invalid_argument("s_star must be positive");
  }
  if (max_events_per_unit < 1) {
    throw std::invalid_argument("max_events_per_unit must be >= 1");
  }
  if (params.eta.alpha.size() != params.kappa.alpha_dim() ||
      params.eta.beta.size() != params.kappa.beta_dim(covariates.dimension)) {
    throw std::invalid_argument("eta dimension does not match the model");
  }
  if (!params.kappa.eta_in_domain(params.eta)) {
    throw std::invalid_argument("eta outside the domain of rho");
  }
  for (std::size_t k = 0; k < covariates.change_times.size(); ++k) {
    const double c = covariates.change_times[k];
    if (!(c > 0.0 && c < s_star) || (k > 0 && !(c > covariates.change_times[k - 1]))) {
      throw std::invalid_argument("covariate change times must increase within (0, s_star)");
    }
  }
}

std::optional<double> next_event_time(const UnitPath& unit, double current_time,
                                      const ModelParams& params, double exp_draw) {
  const auto* hazard = std::get_if<BaselineHazard>(&params.baseline);
  if (hazard == nullptr) {
    throw std::invalid_argument("next_event_time needs a hazard-function baseline");
  }
  const double stop = unit.end();
  if (!(current_time < stop)) {
    throw std::invalid_argument("next_event_time: current time at or past end of observation");
  }
  if (!(exp_draw > 0.0)) throw std::invalid_argument("exp_draw must be positive");
  const Segment seg = segment(unit, unit.event_count() + 1);
  if (current_time < seg.cal_lo) {
    throw std::invalid_argument("next_event_time: current time precedes the last event");
  }
  const KappaModel& model = params.kappa;
  const bool varying = model.rho.time_dependent();
  const auto& times = unit.covariates.times();

  double remaining = exp_draw;
  double lo = current_time;
  std::size_t k = unit.covariates.index_after(lo);
  while (lo < stop) {
    const double hi = (k + 1 < times.size() && times[k + 1] < stop) ? times[k + 1] : stop;
    const Eigen::VectorXd& x = unit.covariates.values()[k];
    const double a0 = seg.age_at(lo);
    const double a1 = seg.age_at(hi);

    if (!varying) {
      const double kap = model.value(hi, seg.count, x, params.eta);
      double mass;
      if (seg.slope > 0.0) {
        mass = kap / seg.slope * (hazard->cumulative(a1) - hazard->cumulative(a0));
      } else {
        mass = kap * hazard->hazard(a0) * (hi - lo);
      }
      if (!std::isfinite(mass) || !std::isfinite(kap)) {
        throw std::domain_error("non-finite hazard while simulating");
      }
      if (mass >= remaining && kap > 0.0) {
        double s;
        if (seg.slope > 0.0) {
          const double target = hazard->cumulative(a0) + remaining * seg.slope / kap;
          const double age = hazard->inverse_cumulative(target);
          s = seg.cal_lo + (age - seg.age_lo) / seg.slope;
        } else {
          s = lo + remaining / (kap * hazard->hazard(a0));
        }
        return std::clamp(s, lo, hi);
      }
      remaining -= mass;
    } else {
      const auto rate = [&](double v) {
        return hazard->hazard(seg.age_at(v)) * model.value(v, seg.count, x, params.eta);
      };
      const auto integral = [&](double a, double b) {
        if (!(b > a)) return 0.0;
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(rate, a, b, 15,
                                                                             1e-13);
      };
      const double mass = integral(lo, hi);
      if (!std::isfinite(mass)) throw std::domain_error("non-finite hazard while simulating");
      if (mass >= remaining) {
        double a = lo;
        double b = hi;
        while (b - a > 1e-12 * std::max(1.0, b)) {
          const double mid = 0.5 * (a + b);
          if (integral(lo, mid) < remaining) {
            a = mid;
          } else {
            b = mid;
          }
        }
        return b;
      }
      remaining -= mass;
    }
    lo = hi;
    ++k;
  }
  return std::nullopt;
}

UnitPath draw_unit(const SimConfig& config, Rng& rng) {
  UnitPath unit;
  unit.s_star = config.s_star;
  unit.tau = config.censoring.draw(rng, config.s_star);
  unit.covariates = config.covariates.draw(rng);
  switch (config.age.kind) {
    case AgePolicy::Kind::Perfect:
      unit.age = EffectiveAgeSpec::perfect();
      break;
    case AgePolicy::Kind::Minimal:
      unit.age = EffectiveAgeSpec::minimal();
      break;
    case AgePolicy::Kind::Partial:
      unit.age = EffectiveAgeSpec::piecewise({AgeSegment{0.0, 1.0}});
      break;
  }

  const double stop = unit.end();
  double current = 0.0;
  while (current < stop) {
    const double e = rng.exponential();
    std::optional<double> next = next_event_time(unit, current, config.params, e);
    if (!next || !(*next < stop)) break;
    const double s = *next > current ? *next : std::nextafter(current, stop);
    if (!(s < stop)) break;
    if (unit.event_count() >= config.max_events_per_unit) {
      std::ostringstream msg;
      msg << "more than " << config.max_events_per_unit
          << " events in one unit; rho/eta/baseline combination is numerically explosive"
          << " (rho=" << config.params.kappa.rho.name()
          << ", alpha=" << config.params.eta.alpha.transpose() << ")";
      throw ExplosionError(msg.str());
    }
    if (config.age.kind == AgePolicy::Kind::Partial) {
      const Segment last = segment(unit, unit.event_count() + 1);
      const double before = last.age_lo + last.slope * (s - last.cal_lo);
      unit.age.segments.push_back(AgeSegment{config.age.retain * before, 1.0});
    }
    unit.event_times.push_back(s);
    current = s;
  }
  return unit;
}

Cohort draw_cohort(int n, const SimConfig& config) {
  if (n < 1) throw std::invalid_argument("draw_cohort: n must be >= 1");
  config.validate();
  Cohort cohort;
  cohort.units.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng(config.seed, i);
    cohort.units[i] = draw_unit(config, rng);
  });
  return cohort;
}

}  // namespace dynrec
