#include "catch_amalgamated.hpp"

#include "dynrec/errors.hpp"
#include "dynrec/estimate.hpp"
#include "dynrec/inference.hpp"
#include "dynrec/io.hpp"
#include "dynrec/process.hpp"
#include "dynrec/scenarios.hpp"
#include "dynrec/simulate.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace dynrec;
using Catch::Approx;
using fixtures::canonical_cohort;
using fixtures::unit_kappa;
using fixtures::vec;

namespace {

Cohort simulate(const std::string& preset, int n, std::uint64_t seed) {
  const Scenario sc = scenario_preset(preset);
  SimConfig cfg = sc.sim;
  cfg.seed = seed;
  Cohort c = draw_cohort(n, cfg);
  c.t_star = sc.t_star;
  return c;
}

std::vector<double> first_covariate(const Cohort& c) {
  std::vector<double> x;
  for (const UnitPath& u : c.units) x.push_back(u.covariates.values()[0][0]);
  return x;
}

// A rho that ignores alpha.
RhoFamily flat_rho() {
  return RhoFamily::custom(
      1,
      [](double, int, const Eigen::VectorXd&) {
        ScalarDerivs d;
        d.value = 1.0;
        d.grad = Eigen::VectorXd::Zero(1);
        d.hess = Eigen::MatrixXd::Zero(1, 1);
        return d;
      },
      false, "flat");
}

}  // namespace

TEST_CASE("S0 on the canonical fixture", "[estimate]") {
  const Cohort c = canonical_cohort();
  CHECK(s0(c, 0.6, Eta::zeros(0, 0), unit_kappa) == 2.0);
  CHECK(s0(c, 5.0, Eta::zeros(0, 0), unit_kappa) == 0.0);
  Cohort twice = c;
  twice.units.push_back(c.units[0]);
  CHECK(s0(twice, 0.6, Eta::zeros(0, 0), unit_kappa) == 2.0);
}

TEST_CASE("ABN and product-limit estimates on the canonical fixture", "[estimate]") {
  const Cohort c = canonical_cohort();
  const StepFunction lambda = abn_baseline(c, Eta::zeros(0, 0), unit_kappa);
  CHECK(std::abs(lambda(0.7) - 5.0 / 6.0) < 1e-12);
  CHECK(lambda(0.49) == 0.0);
  const SurvivorEstimate surv = ple_survivor(c, Eta::zeros(0, 0), unit_kappa);
  CHECK(std::abs(surv.survivor(0.7) - 1.0 / 3.0) < 1e-12);
  CHECK(surv.survivor(0.2) == 1.0);
  CHECK_FALSE(surv.clipped);
  CHECK(log_partial_likelihood(c, Eta::zeros(0, 0), unit_kappa) ==
        Approx(-std::log(3.0) - std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("t_star excludes later event ages", "[estimate]") {
  Cohort c = canonical_cohort();
  c.t_star = 0.6;
  const RiskSetIndex index(c, unit_kappa);
  CHECK(index.events().size() == 1);
  CHECK(abn_baseline(index, Eta::zeros(0, 0)).size() == 1);
  CHECK(index.evaluate(Eta::zeros(0, 0), 0).loglik == Approx(-std::log(3.0)));
  c.t_star = 0.5;  // closed on the right
  CHECK(RiskSetIndex(c, unit_kappa).events().size() == 1);
}

TEST_CASE("single event with nothing else at risk drives the survivor to 0", "[estimate]") {
  Cohort c;
  UnitPath u;
  u.event_times = {1.0};
  u.tau = 1.0 + 1e-9;
  u.s_star = 2.0;
  // Only the first gap covers age 1.0: the censored gap is shorter.
  c.units.push_back(u);
  const SurvivorEstimate s = ple_survivor(c, Eta::zeros(0, 0), unit_kappa);
  CHECK(s.survivor(1.0) == 0.0);
  CHECK_FALSE(s.clipped);
  CHECK(log_partial_likelihood(c, Eta::zeros(0, 0), unit_kappa) == Approx(-std::log(1.0)));
}

TEST_CASE("product limit clips negative factors", "[estimate]") {
  const SurvivorEstimate s = product_limit(StepFunction({0.5, 1.0}, {0.5, 1.5}));
  CHECK(s.clipped);
  CHECK(s.survivor(0.7) == 0.5);
  CHECK(s.survivor(1.0) == 0.0);
}

TEST_CASE("no events gives a zero baseline", "[estimate]") {
  Cohort c;
  UnitPath u;
  u.tau = 1.0;
  u.s_star = 1.0;
  c.units.push_back(u);
  CHECK(abn_baseline(c, Eta::zeros(0, 0), unit_kappa).empty());
  const FitResult fit = dynrec::fit(c, unit_kappa);
  CHECK(fit.event_count == 0);
  CHECK(fit.lambda0_hat(10.0) == 0.0);
}

TEST_CASE("ABN reduces to Nelson-Aalen for HPP perfect repair", "[estimate]") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Cohort c = simulate("hpp", 150, seed);
    Cohort all = c;
    all.t_star.reset();
    const StepFunction lambda = abn_baseline(all, Eta::zeros(0, 0), unit_kappa);
    const auto na = oracles::nelson_aalen(all);
    REQUIRE(lambda.size() == na.size());
    for (std::size_t g = 0; g < na.size(); ++g) {
      CHECK(lambda.locations()[g] == na[g].first);
      CHECK(lambda.values()[g] == na[g].second);
    }
  }
}

TEST_CASE("Andersen-Gill reduction matches a brute-force maximizer", "[estimate]") {
  const KappaModel cox{RhoFamily::identity(), LinkFamily::exponential()};
  for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    Cohort c = simulate("cox-reduction", 20, seed);
    c.t_star.reset();
    const auto x = first_covariate(c);
    const double oracle = oracles::golden_max(
        [&](double b) { return oracles::andersen_gill_loglik(c, x, b); }, -10.0, 10.0);
    const EtaFit fit = fit_eta(c, cox);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.eta.beta[0] - oracle) < 1e-6);
  }
}

TEST_CASE("two-group perfect-repair fit matches golden section", "[estimate]") {
  Cohort c = simulate("hpp", 60, 8);
  c.t_star.reset();
  std::vector<double> x;
  for (std::size_t i = 0; i < c.units.size(); ++i) {
    x.push_back(i % 2 == 0 ? 0.0 : 1.0);
    c.units[i].covariates = CovariatePath::constant(vec({x.back()}));
  }
  const KappaModel m{RhoFamily::identity(), LinkFamily::exponential()};
  const double oracle = oracles::golden_max(
      [&](double b) { return oracles::gap_loglik(c, x, b); }, -10.0, 10.0);
  const EtaFit fit = fit_eta(c, m);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.eta.beta[0] - oracle) < 1e-6);
  // The library normalizes the risk-set sum by n.
  int events = 0;
  for (const UnitPath& u : c.units) events += u.event_count();
  CHECK(log_partial_likelihood(c, fit.eta, m) ==
        Approx(oracles::gap_loglik(c, x, fit.eta.beta[0]) + events * std::log(c.size()))
            .epsilon(1e-12));
}

TEST_CASE("kappa independent of eta", "[estimate]") {
  const Cohort c = simulate("hpp", 30, 4);
  const KappaModel m{flat_rho(), LinkFamily::identity()};
  const Eta init{vec({0.3}), vec({})};
  CHECK(score(c, init, m).norm() == 0.0);
  CHECK(hessian(c, init, m).norm() == 0.0);
  FitOptions opts;
  opts.init = init;
  const EtaFit fit = fit_eta(c, m, opts);
  CHECK(fit.converged);
  CHECK(fit.iterations == 0);
  CHECK(fit.eta.alpha[0] == 0.3);
  const FitResult full = dynrec::fit(c, m, opts);
  CHECK(full.degenerate);
  CHECK(full.sigma_hat.norm() == 0.0);
  const QnMoments q = qn_moments(c, 0.2, init, init, m);
  CHECK(q.q1.norm() == 0.0);
  CHECK(q.v.norm() == 0.0);
}

TEST_CASE("Q_n weights form a probability", "[estimate]") {
  const Cohort c = simulate("partial-repair", 25, 6);
  const Scenario sc = scenario_preset("partial-repair");
  for (double t : {0.05, 0.3, 0.7}) {
    const QnMeasure q = qn_measure(c, t, sc.sim.params.eta, sc.sim.params.kappa);
    REQUIRE(q.s0 > 0.0);
    CHECK(q.total_weight() == Approx(1.0).epsilon(1e-14));
    for (const auto& a : q.atoms) CHECK(a.weight >= 0.0);
  }
  CHECK_THROWS_AS(qn_moments(c, 100.0, sc.sim.params.eta, sc.sim.params.eta, sc.sim.params.kappa),
                  EmptyRiskSetError);
}

TEST_CASE("identical covariates make the beta block of v vanish", "[estimate]") {
  Cohort c = simulate("hpp", 20, 7);
  for (UnitPath& u : c.units) u.covariates = CovariatePath::constant(vec({0.4}));
  const KappaModel m{RhoFamily::power_count(), LinkFamily::exponential()};
  const Eta eta{vec({0.8}), vec({0.5})};
  const QnMoments q = qn_moments(c, 0.2, eta, eta, m);
  CHECK(std::abs(q.v(1, 1)) < 1e-15);
}

TEST_CASE("sweep moments agree with direct enumeration", "[estimate]") {
  const Cohort c = simulate("partial-repair", 40, 21);
  const Scenario sc = scenario_preset("partial-repair");
  const RiskSetIndex index(c, sc.sim.params.kappa);
  std::vector<double> ages = index.distinct_ages();
  ages.push_back(10.0);
  const RiskMoments m = index.moments(ages, sc.sim.params.eta, 2);
  for (std::size_t g = 0; g < ages.size(); ++g) {
    const ScalarDerivs d = s0_derivs(c, ages[g], sc.sim.params.eta, sc.sim.params.kappa);
    CHECK(m.s0[g] == Approx(d.value).epsilon(1e-12).margin(1e-300));
    CHECK((m.s1[g] - d.grad).norm() < 1e-12 * std::max(1.0, d.grad.norm()));
    CHECK((m.s2[g] - d.hess).norm() < 1e-12 * std::max(1.0, d.hess.norm()));
  }
  CHECK(m.s0.back() == 0.0);
}

TEST_CASE("time-dependent rho path matches the sweep", "[estimate]") {
  const Cohort c = simulate("power-count", 60, 31);
  const auto power = RhoFamily::power_count();
  const auto same = RhoFamily::custom(
      1, [power](double s, int k, const Eigen::VectorXd& a) { return power.evaluate(s, k, a); },
      true, "power-count-copy");
  const KappaModel fast{power, LinkFamily::exponential()};
  const KappaModel slow{same, LinkFamily::exponential()};
  FitOptions opts;
  opts.init = Eta{vec({1.0}), vec({0.0})};
  const EtaFit a = fit_eta(c, fast, opts);
  const EtaFit b = fit_eta(c, slow, opts);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK((a.eta.stacked() - b.eta.stacked()).norm() < 1e-9);
  const StepFunction la = abn_baseline(c, a.eta, fast);
  const StepFunction lb = abn_baseline(c, a.eta, slow);
  REQUIRE(la.size() == lb.size());
  for (std::size_t g = 0; g < la.size(); ++g) {
    CHECK(la.values()[g] == Approx(lb.values()[g]).epsilon(1e-12));
  }
}

TEST_CASE("fit on the power-count scenario", "[estimate]") {
  const Cohort c = simulate("power-count", 400, 41);
  const Scenario sc = scenario_preset("power-count");
  const FitResult fit = dynrec::fit(c, sc.sim.params.kappa, {std::nullopt, sc.t_star});
  REQUIRE(fit.converged);
  CHECK(fit.final_score_norm < 1e-8);
  CHECK(fit.t_star == 1.0);
  CHECK(std::abs(fit.eta_hat.alpha[0] - 0.8) < 0.2);
  CHECK(std::abs(fit.eta_hat.beta[0] - 0.5) < 0.3);
  const Eigen::MatrixXd h = hessian(c, fit.eta_hat, sc.sim.params.kappa);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-h);
  CHECK(eig.eigenvalues().minCoeff() >= 0.0);
  // Lambda0_hat is nondecreasing from 0.
  double prev = 0.0;
  for (double v : fit.lambda0_hat.values()) {
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(fit.lambda0_hat(1.0) == Approx(1.0).margin(0.2));
}

TEST_CASE("minus the hessian matches the Q_n variance representation", "[estimate]") {
  const Cohort c = simulate("power-count", 800, 51);
  const Scenario sc = scenario_preset("power-count");
  const RiskSetIndex index(c, sc.sim.params.kappa, sc.t_star);
  const Eta& truth = sc.sim.params.eta;
  const Eigen::MatrixXd neg_h = -index.evaluate(truth, 2).hessian;
  const Eigen::MatrixXd v = sigma_hat(index, truth, abn_baseline(index, truth));
  CHECK((neg_h - v).norm() / v.norm() < 0.10);
}

TEST_CASE("ABN invariances", "[estimate]") {
  Cohort c = simulate("cox-reduction", 50, 61);
  c.t_star.reset();
  const KappaModel m{RhoFamily::identity(), LinkFamily::exponential()};
  const Eta eta{vec({}), vec({0.3})};
  const StepFunction base = abn_baseline(c, eta, m);

  Cohort reversed = c;
  std::reverse(reversed.units.begin(), reversed.units.end());
  const StepFunction rev = abn_baseline(reversed, eta, m);
  REQUIRE(rev.size() == base.size());
  for (std::size_t g = 0; g < base.size(); ++g) {
    CHECK(rev.values()[g] == Approx(base.values()[g]).epsilon(1e-13));
  }

  // psi scaled by c = exp(0.7) through a constant second covariate.
  Cohort padded = c;
  for (UnitPath& u : padded.units) {
    const double x = u.covariates.values()[0][0];
    u.covariates = CovariatePath::constant(vec({x, 1.0}));
  }
  const Eta scaled{vec({}), vec({0.3, 0.7})};
  const StepFunction sc_l = abn_baseline(padded, scaled, m);
  const RiskSetIndex i0(c, m);
  const RiskSetIndex i1(padded, m);
  const auto m0 = i0.moments(i0.distinct_ages(), eta, 0);
  const auto m1 = i1.moments(i1.distinct_ages(), scaled, 0);
  for (std::size_t g = 0; g < base.size(); ++g) {
    CHECK(m1.s0[g] == Approx(std::exp(0.7) * m0.s0[g]).epsilon(1e-13));
    CHECK(sc_l.jumps()[g] == Approx(base.jumps()[g] / std::exp(0.7)).epsilon(1e-13));
    CHECK(sc_l.jumps()[g] * m1.s0[g] == Approx(base.jumps()[g] * m0.s0[g]).epsilon(1e-13));
  }

  // Shifting every covariate by a constant leaves the profile likelihood and
  // hence beta_hat unchanged.
  Cohort shifted = c;
  for (UnitPath& u : shifted.units) {
    u.covariates = CovariatePath::constant(vec({u.covariates.values()[0][0] + 1.0}));
  }
  CHECK(fit_eta(shifted, m).eta.beta[0] == Approx(fit_eta(c, m).eta.beta[0]).epsilon(1e-9));
}

TEST_CASE("estimation rejects mismatched eta and zero slopes", "[estimate]") {
  const Cohort c = canonical_cohort();
  CHECK_THROWS_AS(log_partial_likelihood(c, Eta{vec({1.0}), vec({})}, unit_kappa),
                  std::invalid_argument);
  Cohort flat = c;
  flat.units[0].age = EffectiveAgeSpec::piecewise({{0.0, 1.0}, {0.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(RiskSetIndex(flat, unit_kappa), DegenerateAgeError);
}

TEST_CASE("frozen Andersen-Gill reference cohort", "[estimate]") {
  // Reference from tools/cox_oracle.py (scipy Brent on the partial likelihood).
  const double reference = 0.443658268385;
  CohortFile file = load_cohort(std::string(DYNREC_TEST_DATA) + "/cox20.cohort");
  file.cohort.t_star.reset();
  const EtaFit fit =
      fit_eta(file.cohort, {RhoFamily::identity(), LinkFamily::exponential()});
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.eta.beta[0] - reference) < 1e-6);
}
