// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance --cli <dynrec binary> --work <scratch dir> [--only 1,2,...]

#include "dynrec/estimate.hpp"
#include "dynrec/mc.hpp"
#include "dynrec/scenarios.hpp"
#include "dynrec/simulate.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string cli_path;
fs::path work;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string failed_checks(const McReport& r) {
  std::string out;
  if (!r.error.empty()) out += " error: " + r.error;
  for (const Check& c : r.checks) {
    if (!c.passed) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "; %s = %.4g not in [%.4g, %.4g]", c.name.c_str(), c.value,
                    c.lo, c.hi);
      out += buf;
    }
  }
  return out;
}

Outcome from_report(const McReport& r, double seconds, double limit) {
  Outcome o;
  const bool in_time = limit <= 0.0 || seconds < limit;
  o.passed = r.passed() && in_time;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu checks, %d replications (%d excluded), %.1f s", r.checks.size(),
                r.attempted, r.nonconverged, seconds);
  o.detail = buf;
  if (limit > 0.0) {
    std::snprintf(buf, sizeof buf, " (limit %.0f s)", limit);
    o.detail += buf;
  }
  o.detail += failed_checks(r);
  return o;
}

StudyConfig study(const std::string& preset, std::vector<int> sizes, int reps, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.scenario = scenario_preset(preset);
  cfg.sample_sizes = std::move(sizes);
  cfg.replications = reps;
  cfg.seed = seed;
  return cfg;
}

Cohort simulate(const std::string& preset, int n, std::uint64_t seed) {
  const Scenario sc = scenario_preset(preset);
  SimConfig cfg = sc.sim;
  cfg.seed = seed;
  return draw_cohort(n, cfg);
}

Outcome criterion1() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = identity_suite(20260101, 100);
  return from_report(r, seconds_since(start), 60.0);
}

Outcome criterion2() {
  const Cohort c = fixtures::canonical_cohort();
  const Eta none = Eta::zeros(0, 0);
  const double lambda = abn_baseline(c, none, fixtures::unit_kappa)(0.7);
  const double surv = ple_survivor(c, none, fixtures::unit_kappa).survivor(0.7);
  Outcome o;
  o.passed = std::abs(lambda - 5.0 / 6.0) <= 1e-12 && std::abs(surv - 1.0 / 3.0) <= 1e-12;
  char buf[128];
  std::snprintf(buf, sizeof buf, "Lambda0_hat(0.7) = %.17g, survivor(0.7) = %.17g", lambda, surv);
  o.detail = buf;
  return o;
}

Outcome criterion3() {
  int cohorts = 0;
  int mismatches = 0;
  std::size_t jumps = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (int n : {1, 10, 200}) {
      const Cohort c = simulate("hpp", n, seed);
      const StepFunction lambda = abn_baseline(c, Eta::zeros(0, 0), fixtures::unit_kappa);
      const auto na = oracles::nelson_aalen(c);
      ++cohorts;
      jumps += na.size();
      bool same = lambda.size() == na.size();
      for (std::size_t g = 0; same && g < na.size(); ++g) {
        same = lambda.locations()[g] == na[g].first && lambda.values()[g] == na[g].second;
      }
      mismatches += !same;
    }
  }
  Outcome o;
  o.passed = mismatches == 0;
  o.detail = std::to_string(cohorts) + " cohorts, " + std::to_string(jumps) +
             " jumps, exact mismatches: " + std::to_string(mismatches);
  return o;
}

Outcome criterion4() {
  const KappaModel cox{RhoFamily::identity(), LinkFamily::exponential()};
  double worst = 0.0;
  int fixtures_run = 0;
  bool all_converged = true;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    for (int n : {5, 12, 20}) {
      Cohort c = simulate("cox-reduction", n, seed);
      std::vector<double> x;
      for (const UnitPath& u : c.units) x.push_back(u.covariates.values()[0][0]);
      // Skip fixtures whose likelihood has no finite maximizer.
      const double oracle = oracles::golden_max(
          [&](double b) { return oracles::andersen_gill_loglik(c, x, b); }, -50.0, 50.0);
      if (std::abs(oracle) > 40.0) continue;
      const EtaFit fit = fit_eta(c, cox);
      all_converged = all_converged && fit.converged;
      worst = std::max(worst, std::abs(fit.eta.beta[0] - oracle));
      ++fixtures_run;
    }
  }
  Outcome o;
  o.passed = all_converged && worst <= 1e-6 && fixtures_run >= 50;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d fixtures, max |beta_hat - oracle| = %.3g", fixtures_run,
                worst);
  o.detail = buf;
  return o;
}

Outcome criterion5() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = martingale_study(study("partial-repair", {2000}, 1, 20260105));
  return from_report(r, seconds_since(start), 60.0);
}

Outcome criterion6() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = consistency_study(study("power-count", {50, 200, 800}, 200, 20260106));
  return from_report(r, seconds_since(start), 600.0);
}

Outcome criterion7() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = coverage_study(study("power-count", {400}, 500, 20260107), 0.95);
  return from_report(r, seconds_since(start), 900.0);
}

Outcome criterion8() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = normality_study(study("power-count", {800}, 500, 20260108));
  return from_report(r, seconds_since(start), 0.0);
}

Outcome criterion9() {
  const auto start = std::chrono::steady_clock::now();
  const McReport r = variance_study(study("power-count", {800}, 2000, 20260109));
  return from_report(r, seconds_since(start), 0.0);
}

// Runs the CLI with output captured to files; returns the exit status.
int run_cli(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = "'" + cli_path + "' " + args + " > '" + stdout_file.string() +
                          "' 2> '" + stdout_file.string() + ".err'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file under dir, keyed by relative path.
std::vector<std::pair<std::string, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome criterion10() {
  const std::vector<std::string> commands{
      "simulate --n 40 --seed 11 --scenario partial-repair --out {d}/a.cohort",
      "simulate --n 3 --seed 12 --scenario cox-reduction",
      "simulate --n 30 --seed 13 --scenario renewal-weibull --out {d}/r.cohort",
      "fit --in {d}/a.cohort --out {d}/a.fit --plots {d}/plots",
      "fit --in {d}/r.cohort --rho identity --link none --level 0.9 --out {d}/r.fit",
      "plot --in {d}/a.fit --out-dir {d}/replot",
      "check --suite identities --fixtures 10 --seed 3 --out {d}/identities.json",
      "check --suite martingale --n 300 --seed 3 --out {d}/martingale.json",
      "check --suite consistency --n 30 60 --reps 4 --seed 3 --out {d}/consistency.json",
      "check --suite coverage --n 60 --reps 50 --seed 3 --out {d}/coverage.json",
      "check --suite normality --n 60 --reps 6 --seed 3 --out {d}/normality.json",
      "mc --suite variance --n 60 --reps 6 --seed 3 --out {d}/variance.json",
  };
  std::vector<std::vector<std::pair<std::string, std::string>>> runs;
  std::string detail;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = work / ("determinism" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      std::string args = commands[i];
      for (std::size_t p = args.find("{d}"); p != std::string::npos; p = args.find("{d}")) {
        args.replace(p, 3, dir.string());
      }
      const int code = run_cli(args, dir / ("stdout" + std::to_string(i)));
      if (code != 0 && code != 6) {
        detail += "; '" + commands[i] + "' exited " + std::to_string(code);
      }
      std::ofstream(dir / ("exit" + std::to_string(i))) << code;
    }
    // Paths in the output name the run directory; normalize them.
    auto files = tree(dir);
    for (auto& [name, content] : files) {
      for (std::size_t p = content.find(dir.string()); p != std::string::npos;
           p = content.find(dir.string(), p)) {
        content.replace(p, dir.string().size(), "{d}");
      }
    }
    runs.push_back(std::move(files));
  }
  int differing = 0;
  if (runs[0].size() != runs[1].size()) {
    detail += "; file sets differ";
    ++differing;
  } else {
    for (std::size_t i = 0; i < runs[0].size(); ++i) {
      if (runs[0][i] != runs[1][i]) {
        detail += "; " + runs[0][i].first + " differs";
        ++differing;
      }
    }
  }
  Outcome o;
  o.passed = differing == 0 && detail.empty();
  o.detail = std::to_string(commands.size()) + " commands x 2 runs, " +
             std::to_string(runs[0].size()) + " outputs compared" + detail;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli_path = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: acceptance --cli <dynrec> --work <dir> [--only 1,2,...]\n");
      return 2;
    }
  }
  if (cli_path.empty() || work.empty()) {
    std::fprintf(stderr, "usage: acceptance --cli <dynrec> --work <dir> [--only 1,2,...]\n");
    return 2;
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"identity suite on 100 random fixtures in under 1 min", criterion1},
      {"closed-form canonical fixture", criterion2},
      {"Nelson-Aalen reduction, exact", criterion3},
      {"Andersen-Gill reduction within 1e-6", criterion4},
      {"martingale mean within 3 SE at 20 ages, n = 2000, under 1 min", criterion5},
      {"consistency rates, n = 50/200/800, 200 reps, under 10 min", criterion6},
      {"coverage of eta intervals and Lambda0 bands, n = 400, 500 reps, under 15 min",
       criterion7},
      {"normality and independence, n = 800, 500 reps", criterion8},
      {"variance consistency, n = 800", criterion9},
      {"CLI determinism", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.passed;
    std::printf("%s criterion %d: %s [%s]\n", o.passed ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
