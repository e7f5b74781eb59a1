#include "dynrec/process.hpp"

#include "dynrec/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynrec {

namespace {

void check_calendar(const UnitPath& unit, double s) {
  if (!(s >= 0.0 && s <= unit.s_star)) {
    throw std::out_of_range("calendar time " + std::to_string(s) +
                            " outside [0, s_star]");
  }
}

void require_slope(const Segment& seg) {
  if (!(seg.slope > 0.0)) {
    throw DegenerateAgeError("effective age has zero slope on segment " +
                             std::to_string(seg.index));
  }
}

// Gauss-Kronrod integral of a smooth integrand over (a, b).
template <class F>
double quadrature(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 15, 1e-14);
}

double kappa_on_piece(const UnitPath& unit, const AgePiece& piece, double v,
                      const Eta& eta, const KappaModel& model) {
  return model.value(v, piece.count, unit.covariates.values()[piece.covariate_index], eta);
}

}  // namespace

Segment segment(const UnitPath& unit, int j) {
  const int m = unit.event_count();
  if (j < 1 || j > m + 1) throw std::out_of_range("segment index out of range");
  Segment seg;
  seg.index = j;
  seg.count = j - 1;
  seg.cal_lo = j == 1 ? 0.0 : unit.event_times[static_cast<std::size_t>(j - 2)];
  seg.ends_at_event = j <= m;
  seg.cal_hi = seg.ends_at_event ? unit.event_times[static_cast<std::size_t>(j - 1)]
                                 : unit.end();
  switch (unit.age.policy) {
    case RepairPolicy::Perfect:
      seg.age_lo = 0.0;
      seg.slope = 1.0;
      break;
    case RepairPolicy::Minimal:
      seg.age_lo = seg.cal_lo;
      seg.slope = 1.0;
      break;
    case RepairPolicy::PiecewiseLinear: {
      if (static_cast<int>(unit.age.segments.size()) < j) {
        throw std::invalid_argument("piecewise age spec has too few segments");
      }
      const AgeSegment& a = unit.age.segments[static_cast<std::size_t>(j - 1)];
      seg.age_lo = a.start_age;
      seg.slope = a.slope;
      break;
    }
  }
  return seg;
}

std::vector<Segment> segments(const UnitPath& unit, double s) {
  check_calendar(unit, s);
  const double stop = std::min(s, unit.end());
  const int open = unit.events_before(s) + 1;
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(open));
  for (int j = 1; j <= open; ++j) {
    Segment seg = segment(unit, j);
    if (seg.cal_hi > stop) {
      seg.cal_hi = stop;
      seg.ends_at_event = false;
    }
    if (seg.cal_hi > seg.cal_lo) out.push_back(seg);
  }
  return out;
}

std::vector<AgePiece> age_pieces(const UnitPath& unit, double s) {
  std::vector<AgePiece> out;
  const auto& times = unit.covariates.times();
  for (const Segment& seg : segments(unit, s)) {
    double lo = seg.cal_lo;
    std::size_t k = unit.covariates.index_after(lo);
    while (lo < seg.cal_hi) {
      const double hi =
          (k + 1 < times.size() && times[k + 1] < seg.cal_hi) ? times[k + 1] : seg.cal_hi;
      AgePiece piece;
      piece.segment = seg.index;
      piece.count = seg.count;
      piece.cal_lo = lo;
      piece.cal_hi = hi;
      piece.age_lo = seg.age_at(lo);
      piece.age_hi = seg.age_at(hi);
      piece.slope = seg.slope;
      piece.covariate_index = k;
      out.push_back(piece);
      lo = hi;
      ++k;
    }
  }
  return out;
}

double effective_age(const UnitPath& unit, double s) {
  check_calendar(unit, s);
  const Segment seg = segment(unit, std::min(unit.events_before(s), unit.event_count()) + 1);
  return seg.age_at(s);
}

double age_inverse(const UnitPath& unit, int j, double t) {
  const Segment seg = segment(unit, j);
  require_slope(seg);
  if (!(t > seg.age_lo && t <= seg.age_hi())) {
    throw std::out_of_range("age " + std::to_string(t) + " outside the range of segment " +
                            std::to_string(j));
  }
  return std::min(seg.cal_lo + (t - seg.age_lo) / seg.slope, seg.cal_hi);
}

ScalarDerivs kappa(const UnitPath& unit, double s, const Eta& eta,
                   const KappaModel& model) {
  check_calendar(unit, s);
  return model.evaluate(s, unit.events_before(s), unit.covariates.at(s), eta);
}

double intensity(const UnitPath& unit, double s, const ModelParams& params) {
  check_calendar(unit, s);
  const auto* hazard = std::get_if<BaselineHazard>(&params.baseline);
  if (hazard == nullptr) {
    throw std::invalid_argument("intensity needs a hazard-function baseline");
  }
  if (s > unit.tau) return 0.0;
  const double rate = hazard->hazard(effective_age(unit, s));
  if (rate == 0.0) return 0.0;
  return rate * params.kappa.value(s, unit.events_before(s), unit.covariates.at(s), params.eta);
}

StepFunction counting_N(const UnitPath& unit, double s) {
  check_calendar(unit, s);
  std::vector<std::pair<double, double>> jumps;
  for (int j = 1; j <= unit.event_count(); ++j) {
    const Segment seg = segment(unit, j);
    if (seg.cal_hi > s) break;
    jumps.emplace_back(seg.age_hi(), 1.0);
  }
  return StepFunction::from_jumps(std::move(jumps));
}

ScalarDerivs at_risk_Y_derivs(const UnitPath& unit, double s, double t,
                              const Eta& eta, const KappaModel& model) {
  ScalarDerivs out;
  out.grad = Eigen::VectorXd::Zero(eta.size());
  out.hess = Eigen::MatrixXd::Zero(eta.size(), eta.size());
  for (const Segment& seg : segments(unit, s)) {
    require_slope(seg);
    if (!(t > seg.age_lo && t <= seg.age_hi())) continue;
    const double v = std::min(seg.cal_lo + (t - seg.age_lo) / seg.slope, seg.cal_hi);
    const ScalarDerivs k = model.evaluate(v, seg.count, unit.covariates.at(v), eta);
    out.value += k.value / seg.slope;
    out.grad += k.grad / seg.slope;
    out.hess += k.hess / seg.slope;
  }
  return out;
}

double at_risk_Y(const UnitPath& unit, double s, double t, const Eta& eta,
                 const KappaModel& model) {
  double total = 0.0;
  for (const Segment& seg : segments(unit, s)) {
    require_slope(seg);
    if (!(t > seg.age_lo && t <= seg.age_hi())) continue;
    const double v = std::min(seg.cal_lo + (t - seg.age_lo) / seg.slope, seg.cal_hi);
    total += model.value(v, seg.count, unit.covariates.at(v), eta) / seg.slope;
  }
  return total;
}

double integrate_at_risk(const UnitPath& unit, double s, double t,
                         const ModelParams& params, const StepFunction* weight) {
  const KappaModel& model = params.kappa;
  const bool varying = model.rho.time_dependent();
  const auto* hazard = std::get_if<BaselineHazard>(&params.baseline);
  const auto* steps = std::get_if<StepFunction>(&params.baseline);
  const auto H = [weight](double w) { return weight == nullptr ? 1.0 : (*weight)(w); };

  double total = 0.0;
  for (const AgePiece& piece : age_pieces(unit, s)) {
    if (!(piece.slope > 0.0)) {
      throw DegenerateAgeError("effective age has zero slope on segment " +
                               std::to_string(piece.segment));
    }
    const double a = piece.age_lo;
    const double b = std::min(piece.age_hi, t);
    if (!(b > a)) continue;
    const auto calendar = [&](double w) {
      return std::min(piece.cal_lo + (w - a) / piece.slope, piece.cal_hi);
    };
    const double flat_kappa =
        varying ? 0.0 : kappa_on_piece(unit, piece, piece.cal_hi, params.eta, model);

    if (steps != nullptr) {
      const auto loc = steps->locations();
      const auto jump = steps->jumps();
      auto it = std::upper_bound(loc.begin(), loc.end(), a);
      for (; it != loc.end() && *it <= b; ++it) {
        const double w = *it;
        const double k = varying ? kappa_on_piece(unit, piece, calendar(w), params.eta, model)
                                 : flat_kappa;
        total += H(w) * k / piece.slope * jump[static_cast<std::size_t>(it - loc.begin())];
      }
      continue;
    }

    // Continuous baseline: split (a, b] where the weight function jumps.
    std::vector<double> cuts{a};
    if (weight != nullptr) {
      const auto loc = weight->locations();
      for (auto it = std::upper_bound(loc.begin(), loc.end(), a);
           it != loc.end() && *it < b; ++it) {
        cuts.push_back(*it);
      }
    }
    cuts.push_back(b);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double lo = cuts[c];
      const double hi = cuts[c + 1];
      const double h = H(lo);
      if (h == 0.0) continue;
      double part;
      if (!varying) {
        part = flat_kappa * (hazard->cumulative(hi) - hazard->cumulative(lo));
      } else {
        part = quadrature(
            [&](double w) {
              return kappa_on_piece(unit, piece, calendar(w), params.eta, model) *
                     hazard->hazard(w);
            },
            lo, hi);
      }
      total += h * part / piece.slope;
    }
  }
  return total;
}

double compensator_A(const UnitPath& unit, double s, double t,
                     const ModelParams& params) {
  return integrate_at_risk(unit, s, t, params, nullptr);
}

double martingale_M(const UnitPath& unit, double s, double t,
                    const ModelParams& params) {
  return counting_N(unit, s)(t) - compensator_A(unit, s, t, params);
}

double martingale_integral(const UnitPath& unit, double s, double t,
                           const ModelParams& params, const StepFunction& weight) {
  double counted = 0.0;
  const StepFunction n = counting_N(unit, s);
  const auto loc = n.locations();
  const auto jump = n.jumps();
  for (std::size_t i = 0; i < loc.size() && loc[i] <= t; ++i) {
    counted += weight(loc[i]) * jump[i];
  }
  return counted - integrate_at_risk(unit, s, t, params, &weight);
}

}  // namespace dynrec
