// dynrec: simulate cohorts, fit the dynamic recurrent-event model, run the
// Monte Carlo checks and draw plots.
//
// Exit codes: 0 ok, 2 bad flags or input, 3 simulation explosion guard,
// 4 non-convergence, 5 degenerate eta, 6 failed check.

#include "dynrec/errors.hpp"
#include "dynrec/estimate.hpp"
#include "dynrec/inference.hpp"
#include "dynrec/io.hpp"
#include "dynrec/mc.hpp"
#include "dynrec/plot.hpp"
#include "dynrec/scenarios.hpp"
#include "dynrec/simulate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace dynrec;

enum Exit { ok = 0, bad_input = 2, explosion = 3, not_converged = 4, degenerate = 5, failed = 6 };

struct SimulateArgs {
  int n = 0;
  std::uint64_t seed = 0;
  std::string scenario = "hpp";
  std::string out;
};

struct FitArgs {
  std::string in;
  std::string rho;
  std::string link;
  std::optional<double> t_star;
  double level = 0.95;
  std::string out;
  std::string plots;
  double tol = 1e-8;
  int max_iter = 100;
};

struct CheckArgs {
  std::string suite = "identities";
  int reps = -1;
  std::uint64_t seed = 1;
  std::string scenario;
  std::vector<int> sizes;
  double level = 0.95;
  int fixtures = 100;
  std::string out;
};

struct PlotArgs {
  std::string in;
  std::string out_dir = ".";
};

void print_fit_table(const FitFile& f) {
  std::printf("n = %d, events used = %d, t* = %.6g, s* = %.6g\n", f.n, f.event_count, f.t_star,
              f.s_star);
  std::printf("rho = %s, link = %s, converged = %s, iterations = %d, |score| = %.3g\n",
              f.rho.c_str(), f.link.c_str(), f.converged ? "yes" : "no", f.iterations,
              f.score_norm);
  if (f.eta.size() > 0) {
    std::printf("\n%-10s %14s %14s %14s %14s\n", "parameter", "estimate", "std.error", "lower",
                "upper");
    for (Eigen::Index j = 0; j < f.eta.size(); ++j) {
      const std::string name = j < f.q ? "alpha[" + std::to_string(j) + "]"
                                       : "beta[" + std::to_string(j - f.q) + "]";
      std::printf("%-10s %14.6g %14.6g %14.6g %14.6g\n", name.c_str(), f.eta[j], f.se[j],
                  f.lower[j], f.upper[j]);
    }
  }
  std::printf("\n%-10s %14s %14s %14s %14s\n", "age", "Lambda0", "lower", "upper", "survivor");
  for (const BandPoint& b : f.band) {
    std::printf("%-10.6g %14.6g %14.6g %14.6g %14.6g\n", b.t, b.estimate, b.lower, b.upper,
                f.survivor(b.t));
  }
}

int cmd_simulate(const SimulateArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  SimConfig sim = sc.sim;
  sim.seed = a.seed;
  CohortFile file;
  file.cohort = draw_cohort(a.n, sim);
  file.cohort.t_star = sc.t_star;
  file.rho = sim.params.kappa.rho.name();
  file.link = std::string(sim.params.kappa.link.name());
  file.q = sim.params.kappa.alpha_dim();
  if (a.out.empty() || a.out == "-") {
    write_cohort(std::cout, file);
  } else {
    save_cohort(a.out, file);
  }
  return ok;
}

int cmd_fit(const FitArgs& a) {
  const CohortFile file = load_cohort(a.in);
  const KappaModel model{rho_from_name(a.rho.empty() ? file.rho : a.rho),
                         link_from_name(a.link.empty() ? file.link : a.link)};
  FitOptions opts;
  opts.t_star = a.t_star;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  const RiskSetIndex index(file.cohort, model, opts.t_star);
  const FitResult fit = dynrec::fit(file.cohort, model, opts);

  std::vector<double> grid;
  for (int d = 1; d <= 10; ++d) grid.push_back(fit.t_star * d / 10.0);
  bool singular = false;
  const FitFile out = make_fit_file(index, fit, a.level, grid, &singular);
  if (!a.out.empty()) save_fit(a.out, out);
  if (!a.plots.empty()) emit_plots(out, a.plots);
  print_fit_table(out);

  if (fit.event_count == 0) {
    std::fprintf(stderr, "warning: no events with effective age <= t*; Lambda0_hat is 0\n");
    return ok;
  }
  if (fit.degenerate || (index.eta_dim() > 0 && singular)) {
    std::fprintf(stderr,
                 "error: eta is not identified (kappa does not depend on eta or sigma_hat is "
                 "singular)\n");
    return degenerate;
  }
  if (!fit.converged) {
    std::fprintf(stderr, "error: Newton-Raphson did not converge; the last iterate was written\n");
    return not_converged;
  }
  if (fit.survivor.clipped) {
    std::fprintf(stderr, "warning: a product-limit factor was negative and clipped at 0\n");
  }
  return ok;
}

StudyConfig study_config(const CheckArgs& a) {
  StudyConfig cfg;
  cfg.seed = a.seed;
  cfg.level = a.level;
  cfg.scenario = scenario_preset("power-count");
  if (a.suite == "martingale") {
    cfg.scenario = scenario_preset("partial-repair");
    cfg.sample_sizes = {2000};
    cfg.replications = 1;
  } else if (a.suite == "consistency") {
    cfg.sample_sizes = {50, 200, 800};
    cfg.replications = 200;
  } else if (a.suite == "coverage") {
    cfg.sample_sizes = {400};
    cfg.replications = 500;
  } else if (a.suite == "normality") {
    cfg.sample_sizes = {800};
    cfg.replications = 500;
  } else if (a.suite == "variance") {
    cfg.sample_sizes = {800};
    cfg.replications = 2000;
  }
  if (!a.scenario.empty()) cfg.scenario = load_scenario(a.scenario);
  if (!a.sizes.empty()) cfg.sample_sizes = a.sizes;
  if (a.reps >= 0) cfg.replications = a.reps;
  cfg.validate();
  return cfg;
}

int cmd_check(const CheckArgs& a) {
  McReport report;
  if (a.suite == "identities") {
    report = identity_suite(a.seed, a.fixtures);
  } else {
    const StudyConfig cfg = study_config(a);
    if (a.suite == "martingale") {
      report = martingale_study(cfg);
    } else if (a.suite == "consistency") {
      report = consistency_study(cfg);
    } else if (a.suite == "coverage") {
      report = coverage_study(cfg, a.level);
    } else if (a.suite == "normality") {
      report = normality_study(cfg);
    } else {
      report = variance_study(cfg);
    }
  }
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + a.out + "'");
    out << report.to_json().dump(1) << '\n';
  }
  std::cout << report.summary();
  std::cout << report.study << ": " << (report.passed() ? "PASS" : "FAIL") << '\n';
  return report.passed() ? ok : failed;
}

int cmd_plot(const PlotArgs& a) {
  for (const std::string& p : emit_plots(load_fit(a.in), a.out_dir)) std::cout << p << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic recurrent-event model: simulation, estimation and checks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a cohort from a scenario");
  simulate->add_option("--n", sim.n, "Number of units")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Random seed")->required();
  simulate->add_option("--scenario", sim.scenario, "Preset name or JSON scenario file");
  simulate->add_option("--out", sim.out, "Cohort file (default stdout)");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit eta, Lambda0 and the survivor function");
  fitc->add_option("--in", fit.in, "Cohort file")->required();
  fitc->add_option("--rho", fit.rho, "identity | power-count | exp-count (default from file)");
  fitc->add_option("--link", fit.link, "none | exp | softplus (default from file)");
  fitc->add_option("--t-star", fit.t_star, "Effective-age window")->check(CLI::PositiveNumber);
  fitc->add_option("--level", fit.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  fitc->add_option("--out", fit.out, "Fit file");
  fitc->add_option("--plots", fit.plots, "Directory for SVG plots");
  fitc->add_option("--tol", fit.tol, "Score tolerance")->check(CLI::PositiveNumber);
  fitc->add_option("--max-iter", fit.max_iter, "Newton iteration cap")
      ->check(CLI::NonNegativeNumber);

  CheckArgs check;
  auto* checkc = app.add_subcommand("check", "Run an identity suite or Monte Carlo study");
  checkc->alias("mc");
  checkc->add_option("--suite", check.suite, "Suite")
      ->check(CLI::IsMember(
          {"identities", "martingale", "consistency", "coverage", "normality", "variance"}));
  checkc->add_option("--reps", check.reps, "Replications")->check(CLI::PositiveNumber);
  checkc->add_option("--seed", check.seed, "Random seed");
  checkc->add_option("--scenario", check.scenario, "Preset name or JSON scenario file");
  checkc->add_option("--n", check.sizes, "Sample sizes (increasing)");
  checkc->add_option("--level", check.level, "Nominal level for coverage")
      ->check(CLI::Range(0.0, 1.0));
  checkc->add_option("--fixtures", check.fixtures, "Identity-suite fixtures")
      ->check(CLI::PositiveNumber);
  checkc->add_option("--out", check.out, "JSON report");

  PlotArgs plot;
  auto* plotc = app.add_subcommand("plot", "Draw SVG plots from a fit file");
  plotc->add_option("--in", plot.in, "Fit file")->required();
  plotc->add_option("--out-dir", plot.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_input;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*fitc) return cmd_fit(fit);
    if (*checkc) return cmd_check(check);
    if (*plotc) return cmd_plot(plot);
  } catch (const ExplosionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return explosion;
  } catch (const DegenerateEtaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return degenerate;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return bad_input;
  }
  return bad_input;
}
