#include "catch_amalgamated.hpp"

#include "dynrec/mc.hpp"
#include "fixtures.hpp"

using namespace dynrec;
using fixtures::vec;

namespace {

StudyConfig small_config(const std::string& preset) {
  StudyConfig cfg;
  cfg.scenario = scenario_preset(preset);
  cfg.sample_sizes = {100};
  cfg.replications = 50;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("identity suite passes on random fixtures", "[mc]") {
  const McReport r = identity_suite(3, 25);
  INFO(r.summary());
  CHECK(r.passed());
  CHECK(r.records.size() == 25);
  CHECK_FALSE(r.checks.empty());
}

TEST_CASE("replications must be positive", "[mc]") {
  StudyConfig cfg = small_config("power-count");
  cfg.replications = 0;
  CHECK_THROWS_AS(consistency_study(cfg), std::invalid_argument);
  cfg.replications = 10;
  CHECK_THROWS_AS(coverage_study(cfg, 0.95), std::invalid_argument);
  cfg.sample_sizes = {200, 100};
  CHECK_THROWS_AS(consistency_study(cfg), std::invalid_argument);
}

TEST_CASE("coverage at level 1 is total", "[mc]") {
  const McReport r = coverage_study(small_config("power-count"), 1.0);
  INFO(r.summary());
  CHECK(r.passed());
  for (const Check& c : r.checks) {
    if (c.name.rfind("coverage", 0) == 0 || c.name.rfind("band", 0) == 0) CHECK(c.value == 1.0);
  }
}

TEST_CASE("studies refuse an unidentified eta", "[mc]") {
  StudyConfig cfg = small_config("hpp");
  cfg.scenario.sim.params.kappa.rho = RhoFamily::custom(
      1,
      [](double, int, const Eigen::VectorXd&) {
        return ScalarDerivs{1.0, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)};
      },
      false, "flat");
  cfg.scenario.sim.params.eta = Eta{vec({0.0}), vec({})};
  const McReport r = coverage_study(cfg, 0.95);
  CHECK_FALSE(r.passed());
  CHECK(r.error.find("degenerate eta") != std::string::npos);
  CHECK(r.checks.empty());
}

TEST_CASE("reports are reproducible from the seed", "[mc]") {
  StudyConfig cfg = small_config("power-count");
  cfg.sample_sizes = {40, 160};
  cfg.replications = 8;
  const std::string a = consistency_study(cfg).to_json().dump();
  const std::string b = consistency_study(cfg).to_json().dump();
  CHECK(a == b);
  cfg.seed = 6;
  CHECK(consistency_study(cfg).to_json().dump() != a);
}

TEST_CASE("martingale mean is centred", "[mc]") {
  StudyConfig cfg = small_config("partial-repair");
  cfg.sample_sizes = {1000};
  cfg.replications = 1;
  const McReport r = martingale_study(cfg);
  INFO(r.summary());
  CHECK(r.passed());
  CHECK(r.aggregates["grid"].size() == 20);
}

TEST_CASE("summary has one line per check", "[mc]") {
  const McReport r = identity_suite(1, 3);
  const std::string s = r.summary();
  CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) >= r.checks.size());
  CHECK(r.to_json()["passed"].get<bool>() == r.passed());
}
