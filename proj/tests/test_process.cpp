#include "catch_amalgamated.hpp"

#include "dynrec/errors.hpp"
#include "dynrec/process.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <stdexcept>

using namespace dynrec;
using Catch::Approx;
using fixtures::canonical_unit;
using fixtures::unit_kappa;
using fixtures::unit_params;
using fixtures::vec;

namespace {

UnitPath piecewise_unit() {
  UnitPath u;
  u.event_times = {0.5, 1.2};
  u.tau = 2.0;
  u.s_star = 2.0;
  u.age = EffectiveAgeSpec::piecewise({{0.0, 1.0}, {0.1, 0.5}, {0.2, 1.0}});
  return u;
}

}  // namespace

TEST_CASE("effective age under each policy", "[process]") {
  UnitPath u = canonical_unit();
  CHECK(effective_age(u, 0.8) == Approx(0.3).epsilon(1e-15));
  CHECK(effective_age(u, 0.5) == 0.5);
  u.age = EffectiveAgeSpec::minimal();
  CHECK(effective_age(u, 1.7) == 1.7);
  CHECK(effective_age(piecewise_unit(), 0.9) == Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(effective_age(u, 2.5), std::out_of_range);
  CHECK_THROWS_AS(effective_age(u, -0.1), std::out_of_range);
}

TEST_CASE("age inverse", "[process]") {
  UnitPath u = canonical_unit();
  CHECK(age_inverse(u, 2, 0.3) == Approx(0.8).epsilon(1e-15));
  u.age = EffectiveAgeSpec::minimal();
  CHECK(age_inverse(u, 2, 0.9) == 0.9);
  CHECK(age_inverse(piecewise_unit(), 2, 0.3) == Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(age_inverse(canonical_unit(), 2, 0.75), std::out_of_range);

  UnitPath flat = piecewise_unit();
  flat.age.segments[1].slope = 0.0;
  CHECK_THROWS_AS(age_inverse(flat, 2, 0.1), DegenerateAgeError);
  CHECK_THROWS_AS(at_risk_Y(flat, 2.0, 0.05, Eta::zeros(0, 0), unit_kappa), DegenerateAgeError);
}

TEST_CASE("kappa at a calendar time uses N(s-)", "[process]") {
  const KappaModel m{RhoFamily::power_count(), LinkFamily::identity()};
  const Eta eta{vec({0.9}), vec({})};
  const UnitPath u = canonical_unit();
  CHECK(kappa(u, 1.5, eta, m).value == Approx(0.81));
  CHECK(kappa(u, 1.2, eta, m).value == Approx(0.9));
  CHECK(kappa(u, 0.5, eta, m).value == 1.0);
}

TEST_CASE("intensity", "[process]") {
  UnitPath u = canonical_unit();
  CHECK(intensity(u, 0.3, unit_params(BaselineHazard::constant(2.0))) == 2.0);
  u.tau = 1.5;
  CHECK(intensity(u, 1.8, unit_params(BaselineHazard::constant(2.0))) == 0.0);

  UnitPath w;
  w.event_times = {0.5};
  w.tau = 2.0;
  w.s_star = 2.0;
  const auto weibull = BaselineHazard::weibull(2.0, 1.0);  // hazard 2t
  CHECK(intensity(w, 0.8, unit_params(weibull)) == Approx(0.6).epsilon(1e-14));

  const StepFunction step({0.5}, {0.4});
  CHECK_THROWS_AS(intensity(w, 0.8, unit_params(step)), std::invalid_argument);
}

TEST_CASE("counting process in effective age", "[process]") {
  UnitPath u = canonical_unit();
  const StepFunction n = counting_N(u, 2.0);
  REQUIRE(n.size() == 2);
  CHECK(n.locations()[0] == 0.5);
  CHECK(n.locations()[1] == Approx(0.7).epsilon(1e-15));
  CHECK(n(0.6) == 1.0);
  CHECK(counting_N(u, 0.4).empty());
  u.age = EffectiveAgeSpec::minimal();
  const StepFunction m = counting_N(u, 2.0);
  CHECK(m.locations()[1] == 1.2);
  CHECK(m(1.0) == 1.0);

  UnitPath tie;
  tie.event_times = {0.5, 1.0};
  tie.tau = 2.0;
  tie.s_star = 2.0;
  CHECK(counting_N(tie, 2.0).jumps()[0] == 2.0);
}

TEST_CASE("generalized at-risk process on the canonical fixture", "[process]") {
  const UnitPath u = canonical_unit();
  const Eta none = Eta::zeros(0, 0);
  CHECK(at_risk_Y(u, 2.0, 0.6, none, unit_kappa) == 2.0);
  CHECK(at_risk_Y(u, 2.0, 0.5, none, unit_kappa) == 3.0);
  CHECK(at_risk_Y(u, 2.0, 0.9, none, unit_kappa) == 0.0);
  // Only the first, censored gap of length 0.4 exists at s = 0.4.
  CHECK(at_risk_Y(u, 0.4, 0.3, none, unit_kappa) == 1.0);
  CHECK(at_risk_Y(u, 0.4, 0.45, none, unit_kappa) == 0.0);
}

TEST_CASE("at-risk process divides kappa by the age slope", "[process]") {
  const UnitPath u = piecewise_unit();
  // Segment 2 covers ages (0.1, 0.45] with slope 0.5.
  CHECK(at_risk_Y(u, 2.0, 0.3, Eta::zeros(0, 0), unit_kappa) == Approx(1.0 + 2.0 + 1.0));
}

TEST_CASE("compensator and martingale on the canonical fixture", "[process]") {
  const UnitPath u = canonical_unit();
  const auto linear = unit_params(BaselineHazard::constant(1.0));
  CHECK(compensator_A(u, 2.0, 0.6, linear) == Approx(1.7).epsilon(1e-14));
  CHECK(compensator_A(u, 2.0, 0.0, linear) == 0.0);
  CHECK(martingale_M(u, 2.0, 0.6, linear) == Approx(-0.7).epsilon(1e-14));
  CHECK(martingale_M(u, 2.0, 0.0, linear) == 0.0);

  const auto step = unit_params(StepFunction({0.5}, {0.4}));
  CHECK(compensator_A(u, 2.0, 0.6, step) == Approx(1.2).epsilon(1e-14));
  CHECK(compensator_A(u, 2.0, 0.4, step) == 0.0);
}

TEST_CASE("compensator and counting process are nondecreasing in t", "[process]") {
  const UnitPath u = piecewise_unit();
  const auto params = unit_params(BaselineHazard::weibull(1.5, 0.8));
  double prev_a = 0.0;
  double prev_n = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.01 * i;
    const double a = compensator_A(u, 2.0, t, params);
    const double n = counting_N(u, 2.0)(t);
    CHECK(a >= prev_a);
    CHECK(n >= prev_n);
    CHECK(n == std::floor(n));
    prev_a = a;
    prev_n = n;
  }
}

TEST_CASE("indicator product identity", "[process]") {
  const UnitPath u = piecewise_unit();
  for (double s : {0.2, 0.7, 1.3, 1.9}) {
    const double age = effective_age(u, s);
    for (double t1 : {0.05, 0.3, 0.6}) {
      for (double t2 : {0.1, 0.35, 0.9}) {
        const bool z1 = age <= t1;
        const bool z2 = age <= t2;
        CHECK((z1 && z2) == (age <= std::min(t1, t2)));
      }
    }
  }
}

TEST_CASE("unit validation", "[process]") {
  UnitPath u = canonical_unit();
  u.event_times = {1.2, 0.5};
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
  u.event_times = {0.5, 2.0};
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
  u = piecewise_unit();
  u.age.segments.pop_back();
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
  u = piecewise_unit();
  u.age.segments[1].start_age = 0.8;  // older than calendar time 0.5
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}
