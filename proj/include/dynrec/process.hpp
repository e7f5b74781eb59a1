#pragma once

// Single-unit evaluation of the effective age, kappa, the intensity, and the
// doubly-indexed processes N(s,t), Y(s,t), A(s,t), M(s,t).

#include "dynrec/families.hpp"
#include "dynrec/model.hpp"
#include "dynrec/step_function.hpp"

#include <vector>

namespace dynrec {

// Inter-event segment j, i.e. the calendar interval (cal_lo, cal_hi] with
// cal_lo = S_{j-1} and cal_hi = S_j (or the end of observation for the last).
struct Segment {
  int index = 1;  // 1-based j
  int count = 0;  // N(v-) = j - 1 on the segment
  double cal_lo = 0.0;
  double cal_hi = 0.0;
  double age_lo = 0.0;  // E_j(S_{j-1}+)
  double slope = 1.0;
  bool ends_at_event = false;

  double age_at(double v) const { return age_lo + slope * (v - cal_lo); }
  double age_hi() const { return age_at(cal_hi); }
};

// A segment restricted to a stretch where the covariate row is constant.
struct AgePiece {
  int segment = 1;
  int count = 0;
  double cal_lo = 0.0;
  double cal_hi = 0.0;
  double age_lo = 0.0;
  double age_hi = 0.0;
  double slope = 1.0;
  std::size_t covariate_index = 0;
};

// Segment j of the unit over its whole observation window.
Segment segment(const UnitPath& unit, int j);
// Segments 1..N(s-)+1, the last one truncated at min(s, tau).
std::vector<Segment> segments(const UnitPath& unit, double s);
std::vector<AgePiece> age_pieces(const UnitPath& unit, double s);

double effective_age(const UnitPath& unit, double s);
// Calendar v in segment j with E_j(v) = t.
double age_inverse(const UnitPath& unit, int j, double t);

ScalarDerivs kappa(const UnitPath& unit, double s, const Eta& eta,
                   const KappaModel& model);

// Y(s) lambda0(E(s)) kappa(s; eta); needs a hazard-function baseline.
double intensity(const UnitPath& unit, double s, const ModelParams& params);

StepFunction counting_N(const UnitPath& unit, double s);

double at_risk_Y(const UnitPath& unit, double s, double t, const Eta& eta,
                 const KappaModel& model);
// Y(s,t;eta) with its gradient and Hessian in eta.
ScalarDerivs at_risk_Y_derivs(const UnitPath& unit, double s, double t,
                              const Eta& eta, const KappaModel& model);

// int_0^t H(w) Y(s,w) Lambda0(dw); H == nullptr means H = 1.
double integrate_at_risk(const UnitPath& unit, double s, double t,
                         const ModelParams& params,
                         const StepFunction* weight = nullptr);

double compensator_A(const UnitPath& unit, double s, double t,
                     const ModelParams& params);
double martingale_M(const UnitPath& unit, double s, double t,
                    const ModelParams& params);
// int_0^t H(w) M(s, dw) in the effective-age domain.
double martingale_integral(const UnitPath& unit, double s, double t,
                           const ModelParams& params, const StepFunction& weight);

}  // namespace dynrec
