#pragma once

#include "dynrec/model.hpp"

namespace fixtures {

// One unit, perfect repair, events {0.5, 1.2}, tau = s* = 2; gaps 0.5, 0.7
// and a censored 0.8.
inline dynrec::UnitPath canonical_unit() {
  dynrec::UnitPath u;
  u.event_times = {0.5, 1.2};
  u.tau = 2.0;
  u.s_star = 2.0;
  u.age = dynrec::EffectiveAgeSpec::perfect();
  return u;
}

inline dynrec::Cohort canonical_cohort() {
  dynrec::Cohort c;
  c.units.push_back(canonical_unit());
  return c;
}

inline const dynrec::KappaModel unit_kappa{dynrec::RhoFamily::identity(),
                                           dynrec::LinkFamily::identity()};

inline dynrec::ModelParams unit_params(dynrec::Baseline baseline) {
  return {std::move(baseline), unit_kappa, dynrec::Eta::zeros(0, 0)};
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace fixtures
