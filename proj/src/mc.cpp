#include "dynrec/mc.hpp"

#include "dynrec/errors.hpp"
#include "dynrec/estimate.hpp"
#include "dynrec/inference.hpp"
#include "dynrec/parallel.hpp"
#include "dynrec/process.hpp"
#include "dynrec/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dynrec {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) rows.push_back(to_std(m.row(a).transpose()));
  return rows;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1.0);
}

Check make_check(std::string name, double value, double lo, double hi) {
  return {std::move(name), value, lo, hi, value >= lo && value <= hi};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance.
double variance(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0 && syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Kolmogorov-Smirnov distance of the sample to the standard normal.
double ks_normal(std::vector<double> z) {
  const boost::math::normal_distribution<double> normal;
  std::sort(z.begin(), z.end());
  const double r = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = boost::math::cdf(normal, z[i]);
    d = std::max({d, (i + 1) / r - f, f - i / r});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Calendar-domain oracles. They integrate over calendar time v directly and
// share no code with the age-domain evaluation in process.cpp.

struct CalSegment {
  double lo = 0.0;
  double hi = 0.0;
  double start = 0.0;
  double slope = 1.0;
  int count = 0;
  bool event_at_hi = false;

  double age(double v) const { return start + slope * (v - lo); }
};

std::vector<CalSegment> calendar_segments(const UnitPath& u, double s) {
  const double stop = std::min(s, u.end());
  std::vector<CalSegment> out;
  double lo = 0.0;
  for (int j = 0; j <= u.event_count(); ++j) {
    const bool has_event = j < u.event_count();
    double hi = has_event ? u.event_times[static_cast<std::size_t>(j)] : stop;
    bool event = has_event && hi <= stop;
    if (hi > stop) {
      hi = stop;
      event = false;
    }
    CalSegment seg;
    seg.lo = lo;
    seg.hi = hi;
    seg.count = j;
    seg.event_at_hi = event;
    switch (u.age.policy) {
      case RepairPolicy::Perfect:
        break;
      case RepairPolicy::Minimal:
        seg.start = lo;
        break;
      case RepairPolicy::PiecewiseLinear:
        seg.start = u.age.segments[static_cast<std::size_t>(j)].start_age;
        seg.slope = u.age.segments[static_cast<std::size_t>(j)].slope;
        break;
    }
    if (hi > lo) out.push_back(seg);
    if (!has_event || u.event_times[static_cast<std::size_t>(j)] >= stop) break;
    lo = hi;
  }
  return out;
}

// Tanh-sinh copes with the algebraic endpoint behaviour of Weibull hazards
// at age 0, where Gauss-Kronrod refinement stalls.
template <class F>
double quad(const F& f, double a, double b) {
  if (!(b > a)) return 0.0;
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  return integrator.integrate([&f](double v, double) { return f(v); }, a, b, 1e-14, &error);
}

// int over v in (0, s] with E(v) <= t of H(E(v)) lambda0(E(v)) kappa(v) dv.
double calendar_compensator(const UnitPath& u, double s, double t, const ModelParams& p,
                            const StepFunction* h) {
  const auto& hazard = std::get<BaselineHazard>(p.baseline);
  double total = 0.0;
  for (const CalSegment& seg : calendar_segments(u, s)) {
    const double upper = std::min(seg.hi, seg.lo + (t - seg.start) / seg.slope);
    if (!(upper > seg.lo)) continue;
    std::vector<double> cuts{seg.lo, upper};
    for (double c : u.covariates.times()) {
      if (c > seg.lo && c < upper) cuts.push_back(c);
    }
    if (h != nullptr) {
      for (double w : h->locations()) {
        const double v = seg.lo + (w - seg.start) / seg.slope;
        if (v > seg.lo && v < upper) cuts.push_back(v);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c];
      const double b = cuts[c + 1];
      if (!(b > a)) continue;
      const Eigen::VectorXd x = u.covariates.at(0.5 * (a + b));
      const double weight = h == nullptr ? 1.0 : (*h)(seg.age(0.5 * (a + b)));
      if (weight == 0.0) continue;
      total += weight * quad(
                            [&](double v) {
                              return hazard.hazard(seg.age(v)) *
                                     p.kappa.value(v, seg.count, x, p.eta);
                            },
                            a, b);
    }
  }
  return total;
}

double calendar_counting(const UnitPath& u, double s, double t, const StepFunction& h) {
  double total = 0.0;
  for (const CalSegment& seg : calendar_segments(u, s)) {
    if (!seg.event_at_hi) continue;
    const double a = seg.age(seg.hi);
    if (a <= t) total += h(a);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Random fixtures.

struct Fixture {
  Cohort cohort;
  ModelParams params;
};

Fixture random_fixture(Rng& rng, int id) {
  Fixture f;
  const double s_star = 3.0;
  const int p = id == 0 ? 0 : static_cast<int>(rng.next() % 3);
  const int n_units = 1 + static_cast<int>(rng.next() % 4);
  const int rho_kind = id == 0 ? 0 : static_cast<int>(rng.next() % 3);
  const int link_kind = (id == 0 || p == 0) ? 0 : 1 + static_cast<int>(rng.next() % 2);
  const int age_kind = static_cast<int>(rng.next() % 3);

  f.params.kappa.rho = rho_kind == 0   ? RhoFamily::identity()
                       : rho_kind == 1 ? RhoFamily::power_count()
                                       : RhoFamily::exp_count();
  f.params.kappa.link = link_kind == 0   ? LinkFamily::identity()
                        : link_kind == 1 ? LinkFamily::exponential()
                                         : LinkFamily::softplus();
  f.params.eta = Eta::zeros(f.params.kappa.alpha_dim(), f.params.kappa.beta_dim(p));
  if (rho_kind == 1) f.params.eta.alpha[0] = rng.uniform(0.5, 1.5);
  if (rho_kind == 2) f.params.eta.alpha[0] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index j = 0; j < f.params.eta.beta.size(); ++j) {
    f.params.eta.beta[j] = rng.uniform(-1.0, 1.0);
  }
  f.params.baseline = rng.uniform() < 0.5
                          ? BaselineHazard::constant(rng.uniform(0.5, 2.0))
                          : BaselineHazard::weibull(rng.uniform(1.0, 3.0), rng.uniform(0.5, 2.0));

  for (int i = 0; i < n_units; ++i) {
    UnitPath u;
    u.s_star = s_star;
    u.tau = rng.uniform(1.0, s_star);
    const int m = id == 1 ? 0 : static_cast<int>(rng.next() % 5);
    for (int k = 0; k < m; ++k) u.event_times.push_back(rng.uniform(0.02, 0.98) * u.end());
    std::sort(u.event_times.begin(), u.event_times.end());
    u.event_times.erase(std::unique(u.event_times.begin(), u.event_times.end()),
                        u.event_times.end());
    if (age_kind == 0) {
      u.age = EffectiveAgeSpec::perfect();
    } else if (age_kind == 1) {
      u.age = EffectiveAgeSpec::minimal();
    } else {
      std::vector<AgeSegment> segs;
      double lo = 0.0;
      for (int j = 0; j <= u.event_count(); ++j) {
        const double hi =
            j < u.event_count() ? u.event_times[static_cast<std::size_t>(j)] : u.end();
        const double start = lo * rng.uniform();
        const double cap = std::min(2.0, (hi - start) / (hi - lo));
        segs.push_back({start, rng.uniform(0.2, cap)});
        lo = hi;
      }
      u.age = EffectiveAgeSpec::piecewise(std::move(segs));
    }
    std::vector<double> times{0.0};
    const int changes = p == 0 ? 0 : static_cast<int>(rng.next() % 3);
    for (int k = 0; k < changes; ++k) times.push_back(rng.uniform(0.05, s_star));
    std::sort(times.begin(), times.end());
    std::vector<Eigen::VectorXd> values;
    for (std::size_t k = 0; k < times.size(); ++k) {
      Eigen::VectorXd x(p);
      for (int d = 0; d < p; ++d) x[d] = rng.uniform(-1.0, 1.0);
      values.push_back(x);
    }
    u.covariates = CovariatePath(std::move(times), std::move(values));
    u.validate();
    f.cohort.units.push_back(std::move(u));
  }
  return f;
}

struct IdentityErrors {
  double representation = 0.0;
  double change_of_variable = 0.0;
  double ratio = 0.0;
  double sweep = 0.0;
  double score = 0.0;
  double hessian = 0.0;
  int evaluations = 0;
};

IdentityErrors check_fixture(const Fixture& f, Rng& rng) {
  IdentityErrors e;
  const Cohort& c = f.cohort;
  const ModelParams& p = f.params;
  const KappaModel& model = p.kappa;
  const double s_star = c.s_star();

  double max_age = 0.0;
  for (const UnitPath& u : c.units) {
    for (const Segment& seg : segments(u, s_star)) max_age = std::max(max_age, seg.age_hi());
  }
  const double t_hi = 1.2 * max_age + 0.1;

  for (const UnitPath& u : c.units) {
    std::vector<std::pair<double, StepFunction>> weights;
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<std::pair<double, double>> jumps;
      for (int k = 0; k < 3; ++k) jumps.emplace_back(rng.uniform(0.0, t_hi), rng.uniform(-1, 1));
      weights.emplace_back(0.0, StepFunction::from_jumps(jumps, rng.uniform(-1, 1)));
    }
    for (int rep = 0; rep < 4; ++rep) {
      const double s = rep == 0 ? s_star : rng.uniform(0.0, s_star);
      const double t = rep == 1 ? t_hi : rng.uniform(0.0, t_hi);
      const double a = compensator_A(u, s, t, p);
      const double oracle = calendar_compensator(u, s, t, p, nullptr);
      e.representation = std::max(e.representation, relative_error(a, oracle));
      for (const auto& [unused, h] : weights) {
        const double age_side = martingale_integral(u, s, t, p, h);
        const double cal_side = calendar_counting(u, s, t, h) -
                                calendar_compensator(u, s, t, p, &h);
        e.change_of_variable = std::max(e.change_of_variable, std::abs(age_side - cal_side));
      }
      ++e.evaluations;
    }
  }

  const RiskSetIndex index(c, model);
  std::vector<double> ages = index.distinct_ages();
  for (int k = 0; k < 5; ++k) ages.push_back(rng.uniform(0.0, t_hi));
  std::sort(ages.begin(), ages.end());
  const RiskMoments m = index.moments(ages, p.eta, 2);
  for (std::size_t g = 0; g < ages.size(); ++g) {
    const ScalarDerivs d = s0_derivs(c, ages[g], p.eta, model);
    e.sweep = std::max(e.sweep, relative_error(m.s0[g], d.value));
    if (!(d.value > 0.0)) continue;
    if (d.grad.size() > 0) {
      e.sweep = std::max(e.sweep, (m.s1[g] - d.grad).cwiseAbs().maxCoeff() /
                                      std::max(d.grad.cwiseAbs().maxCoeff(), 1.0));
      e.sweep = std::max(e.sweep, (m.s2[g] - d.hess).cwiseAbs().maxCoeff() /
                                      std::max(d.hess.cwiseAbs().maxCoeff(), 1.0));
    }
    const QnMoments q = qn_moments(c, ages[g], p.eta, p.eta, model);
    if (d.grad.size() > 0) {
      e.ratio = std::max(e.ratio, (d.grad / d.value - q.q1).cwiseAbs().maxCoeff());
      e.ratio = std::max(e.ratio, (d.hess / d.value - q.q2).cwiseAbs().maxCoeff());
    }
  }

  const int k = index.eta_dim();
  if (k > 0 && !index.events().empty()) {
    const ProfileEval at = index.evaluate(p.eta, 2);
    const double n = c.size();
    const Eigen::VectorXd base = p.eta.stacked();
    const int q = model.alpha_dim();
    for (int j = 0; j < k; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(base[j]));
      Eigen::VectorXd up = base;
      Eigen::VectorXd down = base;
      up[j] += h;
      down[j] -= h;
      const ProfileEval eu = index.evaluate(Eta::split(up, q), 1);
      const ProfileEval ed = index.evaluate(Eta::split(down, q), 1);
      const double fd_score = (eu.loglik - ed.loglik) / (2.0 * h) / n;
      e.score = std::max(e.score, relative_error(at.score[j], fd_score));
      const Eigen::VectorXd fd_col = (eu.score - ed.score) / (2.0 * h);
      for (int a = 0; a < k; ++a) {
        e.hessian = std::max(e.hessian, relative_error(at.hessian(a, j), fd_col[a]));
      }
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Replications.

struct Replicate {
  bool converged = false;
  bool ok = false;
  bool degenerate = false;
  std::string error;
  int events = 0;
  Eigen::VectorXd eta_hat;
  Eigen::VectorXd se;
  Eigen::VectorXd dev;  // sqrt(n)(eta_hat - eta0)
  Eigen::MatrixXd sigma_inv;
  double eta_error = 0.0;
  double sup_error = 0.0;
  std::vector<double> lambda_dev;  // sqrt(n)(Lambda0_hat - Lambda0) on the grid
  std::vector<double> c;           // c_hat(t, t) on the grid
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> vn;          // V_n proxies on the grid
};

double true_cumulative(const Scenario& sc, double t) {
  return std::get<BaselineHazard>(sc.sim.params.baseline).cumulative(t);
}

// sup over [0, t*] of |Lambda0_hat - Lambda0| for a step estimate against a
// continuous nondecreasing truth.
double sup_error(const Scenario& sc, const StepFunction& est, double t_star) {
  double worst = std::abs(est(t_star) - true_cumulative(sc, t_star));
  double prev = est.initial_value();
  const auto loc = est.locations();
  const auto val = est.values();
  for (std::size_t g = 0; g < loc.size() && loc[g] <= t_star; ++g) {
    const double truth = true_cumulative(sc, loc[g]);
    worst = std::max({worst, std::abs(prev - truth), std::abs(val[g] - truth)});
    prev = val[g];
  }
  return worst;
}

std::uint64_t replicate_seed(std::uint64_t seed, int n, int rep) {
  return Rng(seed, (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(rep))
      .next();
}

Replicate replicate(const StudyConfig& cfg, int n, int rep, double level) {
  const Scenario& sc = cfg.scenario;
  SimConfig sim = sc.sim;
  sim.seed = replicate_seed(cfg.seed, n, rep);
  Cohort cohort = draw_cohort(n, sim);
  cohort.t_star = sc.t_star;
  const KappaModel& model = sim.params.kappa;
  const Eta& truth = sim.params.eta;
  const double root_n = std::sqrt(static_cast<double>(n));

  Replicate r;
  try {
    const RiskSetIndex index(cohort, model, sc.t_star);
    FitOptions opts;
    opts.t_star = sc.t_star;
    const EtaFit eta_fit = fit_eta(index, opts);
    r.converged = eta_fit.converged;
    r.events = static_cast<int>(index.events().size());
    r.eta_hat = eta_fit.eta.stacked();
    r.dev = root_n * (r.eta_hat - truth.stacked());
    r.eta_error = (r.eta_hat - truth.stacked()).norm();
    const StepFunction lambda = abn_baseline(index, eta_fit.eta);
    r.sup_error = sup_error(sc, lambda, index.t_star());
    if (index.eta_dim() > 0) {
      const Eigen::MatrixXd h = index.evaluate(eta_fit.eta, 2).hessian;
      r.degenerate = h.cwiseAbs().maxCoeff() < 1e-12;
    }
    if (!r.converged || r.degenerate) return r;

    const Eigen::MatrixXd sigma = sigma_hat(index, eta_fit.eta, lambda);
    const PlugInCovariance cov(index, eta_fit.eta, lambda, sigma);
    r.sigma_inv = cov.sigma_inverse();
    r.se = (r.sigma_inv.diagonal() / n).cwiseSqrt();
    const auto band = cov.lambda_band(sc.grid, level);

    const auto& ages = index.distinct_ages();
    const RiskMoments m0 = index.moments(ages, truth, index.eta_dim() > 0 ? 1 : 0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(index.eta_dim());
    std::size_t g = 0;
    for (std::size_t i = 0; i < sc.grid.size(); ++i) {
      const double t = sc.grid[i];
      for (; g < ages.size() && ages[g] <= t; ++g) {
        if (index.eta_dim() > 0 && m0.s0[g] > 0.0) {
          b += m0.s1[g] / (m0.s0[g] * m0.s0[g]) * (index.multiplicity()[g] / double(n));
        }
      }
      const double dev_lambda = root_n * (lambda(t) - true_cumulative(sc, t));
      r.lambda_dev.push_back(dev_lambda);
      r.c.push_back(band[i].c);
      r.lower.push_back(band[i].lower);
      r.upper.push_back(band[i].upper);
      r.vn.push_back(dev_lambda + (index.eta_dim() > 0 ? r.dev.dot(b) : 0.0));
    }
    r.ok = true;
  } catch (const Error& e) {
    r.error = e.what();
  }
  return r;
}

std::vector<Replicate> run_replicates(const StudyConfig& cfg, int n, double level) {
  std::vector<Replicate> out(static_cast<std::size_t>(cfg.replications));
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = replicate(cfg, n, static_cast<int>(i), level);
  });
  return out;
}

json record_json(const Replicate& r, int n, int rep) {
  json j{{"n", n},           {"rep", rep},          {"converged", r.converged},
         {"ok", r.ok},       {"events", r.events},  {"eta_hat", to_std(r.eta_hat)},
         {"eta_error", r.eta_error}, {"sup_error", r.sup_error}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.ok) {
    j["se"] = to_std(r.se);
    j["lambda_dev"] = r.lambda_dev;
    j["c_hat"] = r.c;
  }
  return j;
}

json config_json(const StudyConfig& cfg) {
  return {{"scenario", scenario_to_json(cfg.scenario)},
          {"sample_sizes", cfg.sample_sizes},
          {"replications", cfg.replications},
          {"seed", cfg.seed},
          {"level", cfg.level}};
}

// Non-convergence accounting shared by the replication studies; returns the
// usable replications.
std::vector<const Replicate*> usable(const std::vector<Replicate>& reps, int n,
                                     const StudyConfig& cfg, McReport& report) {
  std::vector<const Replicate*> out;
  int bad = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].ok) {
      out.push_back(&reps[i]);
    } else {
      ++bad;
    }
    report.records.push_back(record_json(reps[i], n, static_cast<int>(i)));
  }
  report.attempted += static_cast<int>(reps.size());
  report.nonconverged += bad;
  report.checks.push_back(make_check("non-converged fraction n=" + std::to_string(n),
                                     static_cast<double>(bad) / reps.size(), 0.0,
                                     cfg.max_nonconverged));
  return out;
}

// Refuses studies whose eta is not identified.
bool refuse_degenerate(const StudyConfig& cfg, McReport& report) {
  if (cfg.scenario.sim.params.kappa.eta_dim(cfg.scenario.sim.covariates.dimension) == 0) {
    return false;
  }
  const Replicate pilot = replicate(cfg, cfg.sample_sizes.front(), 0, cfg.level);
  if (!pilot.degenerate) return false;
  report.error = "degenerate eta: kappa does not depend on eta, so eta is not identified";
  return true;
}

McReport start_report(const std::string& study, const StudyConfig& cfg) {
  cfg.validate();
  McReport report;
  report.study = study;
  report.config = config_json(cfg);
  return report;
}

}  // namespace

void StudyConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (sample_sizes.empty()) throw std::invalid_argument("sample_sizes must not be empty");
  for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
    if (sample_sizes[i] < 1) throw std::invalid_argument("sample sizes must be positive");
    if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1]) {
      throw std::invalid_argument("sample_sizes must be increasing");
    }
  }
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("level must lie in (0, 1]");
  if (martingale_points < 1) throw std::invalid_argument("martingale_points must be positive");
  scenario.sim.validate();
}

bool McReport::passed() const {
  if (!error.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

json McReport::to_json() const {
  json checks_json = json::array();
  for (const Check& c : checks) {
    checks_json.push_back(
        {{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi}, {"passed", c.passed}});
  }
  json j{{"study", study},
         {"passed", passed()},
         {"config", config},
         {"attempted", attempted},
         {"nonconverged", nonconverged},
         {"checks", checks_json},
         {"aggregates", aggregates},
         {"records", records}};
  if (!error.empty()) j["error"] = error;
  return j;
}

std::string McReport::summary() const {
  std::ostringstream out;
  if (!error.empty()) out << study << ": FAIL " << error << '\n';
  for (const Check& c : checks) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %s: %.6g in [%.6g, %.6g]\n", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.value, c.lo, c.hi);
    out << buf;
  }
  return out.str();
}

McReport identity_suite(std::uint64_t seed, int fixtures) {
  if (fixtures < 1) throw std::invalid_argument("fixtures must be at least 1");
  McReport report;
  report.study = "identities";
  report.config = {{"seed", seed}, {"fixtures", fixtures}};
  std::vector<IdentityErrors> errors(static_cast<std::size_t>(fixtures));
  parallel_for(errors.size(), [&](std::size_t i) {
    Rng rng(seed, i);
    const Fixture f = random_fixture(rng, static_cast<int>(i));
    errors[i] = check_fixture(f, rng);
  });
  IdentityErrors worst;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const IdentityErrors& e = errors[i];
    worst.representation = std::max(worst.representation, e.representation);
    worst.change_of_variable = std::max(worst.change_of_variable, e.change_of_variable);
    worst.ratio = std::max(worst.ratio, e.ratio);
    worst.sweep = std::max(worst.sweep, e.sweep);
    worst.score = std::max(worst.score, e.score);
    worst.hessian = std::max(worst.hessian, e.hessian);
    report.records.push_back({{"fixture", i},
                              {"representation", e.representation},
                              {"change_of_variable", e.change_of_variable},
                              {"ratio", e.ratio},
                              {"sweep", e.sweep},
                              {"score", e.score},
                              {"hessian", e.hessian}});
  }
  report.attempted = fixtures;
  report.checks = {
      make_check("compensator representation (relative)", worst.representation, 0.0, 1e-8),
      make_check("change of variable (absolute)", worst.change_of_variable, 0.0, 1e-10),
      make_check("S0 derivative ratios vs Q_n moments (absolute)", worst.ratio, 0.0, 1e-10),
      make_check("risk-set sweep vs direct S0 (relative)", worst.sweep, 0.0, 1e-10),
      make_check("score vs finite differences (relative)", worst.score, 0.0, 1e-6),
      make_check("hessian vs finite differences (relative)", worst.hessian, 0.0, 1e-5)};
  return report;
}

McReport martingale_study(const StudyConfig& cfg) {
  McReport report = start_report("martingale", cfg);
  const Scenario& sc = cfg.scenario;
  const int n = cfg.sample_sizes.back();
  SimConfig sim = sc.sim;
  sim.seed = replicate_seed(cfg.seed, n, 0);
  const Cohort cohort = draw_cohort(n, sim);
  const double s_star = sim.s_star;

  double t_max = sc.t_star.value_or(0.0);
  if (!(t_max > 0.0)) {
    for (const UnitPath& u : cohort.units) {
      for (const Segment& seg : segments(u, s_star)) t_max = std::max(t_max, seg.age_hi());
    }
  }
  const int points = cfg.martingale_points;
  std::vector<std::vector<double>> values(static_cast<std::size_t>(n));
  parallel_for(values.size(), [&](std::size_t i) {
    for (int g = 1; g <= points; ++g) {
      values[i].push_back(martingale_M(cohort.units[i], s_star, t_max * g / points, sim.params));
    }
  });
  json agg = json::array();
  for (int g = 0; g < points; ++g) {
    std::vector<double> column;
    for (const auto& row : values) column.push_back(row[static_cast<std::size_t>(g)]);
    const double m = mean(column);
    const double se = std::sqrt(variance(column) / n);
    const double t = t_max * (g + 1) / points;
    const double z = se > 0.0 ? std::abs(m) / se : (m == 0.0 ? 0.0 : HUGE_VAL);
    agg.push_back({{"t", t}, {"mean", m}, {"se", se}});
    char name[64];
    std::snprintf(name, sizeof name, "|mean M|/SE at t=%.4g", t);
    report.checks.push_back(make_check(name, z, 0.0, cfg.martingale_z));
  }
  report.attempted = n;
  report.aggregates = {{"n", n}, {"grid", agg}};
  return report;
}

McReport consistency_study(const StudyConfig& cfg) {
  McReport report = start_report("consistency", cfg);
  if (refuse_degenerate(cfg, report)) return report;
  const bool has_eta =
      cfg.scenario.sim.params.kappa.eta_dim(cfg.scenario.sim.covariates.dimension) > 0;
  std::vector<double> eta_med;
  std::vector<double> sup_med;
  json agg = json::array();
  for (int n : cfg.sample_sizes) {
    const auto reps = run_replicates(cfg, n, cfg.level);
    std::vector<double> eta_err;
    std::vector<double> sup_err;
    for (const Replicate* r : usable(reps, n, cfg, report)) {
      eta_err.push_back(r->eta_error);
      sup_err.push_back(r->sup_error);
    }
    eta_med.push_back(median(eta_err));
    sup_med.push_back(median(sup_err));
    agg.push_back({{"n", n}, {"median_eta_error", eta_med.back()},
                   {"median_sup_error", sup_med.back()}, {"used", eta_err.size()}});
  }
  report.aggregates = {{"per_n", agg}};
  for (std::size_t i = 1; i < cfg.sample_sizes.size(); ++i) {
    const int n0 = cfg.sample_sizes[i - 1];
    const int n1 = cfg.sample_sizes[i];
    // Ratio rescaled to a 4x step in n.
    const double power = std::log(4.0) / std::log(static_cast<double>(n1) / n0);
    const std::string span = std::to_string(n0) + "->" + std::to_string(n1);
    auto add = [&](const std::string& what, const std::vector<double>& med) {
      const double ratio = med[i] / med[i - 1];
      report.checks.push_back(
          make_check("median " + what + " decreasing " + span, ratio < 1.0 ? 1.0 : 0.0, 1.0, 1.0));
      report.checks.push_back(make_check("median " + what + " ratio per 4x n " + span,
                                         std::pow(ratio, power), cfg.rate_lo, cfg.rate_hi));
    };
    if (has_eta) add("eta error", eta_med);
    add("sup baseline error", sup_med);
  }
  return report;
}

McReport coverage_study(const StudyConfig& cfg, double level) {
  StudyConfig local = cfg;
  local.level = level;
  McReport report = start_report("coverage", local);
  if (cfg.replications < 50) {
    throw std::invalid_argument("coverage studies need at least 50 replications");
  }
  if (refuse_degenerate(local, report)) return report;
  const Scenario& sc = cfg.scenario;
  const Eigen::VectorXd truth = sc.sim.params.eta.stacked();
  const auto k = truth.size();
  const bool full = level >= 1.0;
  const double lo = full ? 1.0 : cfg.coverage_lo;
  const double hi = full ? 1.0 : cfg.coverage_hi;
  const double z = normal_quantile(level);
  json agg = json::array();
  for (int n : cfg.sample_sizes) {
    const auto reps = run_replicates(local, n, level);
    const auto used = usable(reps, n, local, report);
    const double count = static_cast<double>(used.size());
    Eigen::VectorXd mean_se = Eigen::VectorXd::Zero(k);
    for (const Replicate* r : used) mean_se += r->se / count;
    json per{{"n", n}, {"used", used.size()}};
    for (Eigen::Index j = 0; j < k; ++j) {
      double hits = 0.0;
      double shifted = 0.0;
      const double wrong = truth[j] + cfg.shift_se * mean_se[j];
      for (const Replicate* r : used) {
        const double half = z * r->se[j];
        hits += std::abs(r->eta_hat[j] - truth[j]) <= half;
        shifted += std::abs(r->eta_hat[j] - wrong) <= half;
      }
      const std::string tag = "eta[" + std::to_string(j) + "] n=" + std::to_string(n);
      report.checks.push_back(make_check("coverage " + tag, hits / count, lo, hi));
      per["eta_coverage"].push_back(hits / count);
      if (!full) {
        report.checks.push_back(make_check("shifted-truth coverage " + tag, shifted / count,
                                           0.0, cfg.shift_max_coverage));
        per["shifted_coverage"].push_back(shifted / count);
      }
    }
    for (std::size_t g = 0; g < sc.grid.size(); ++g) {
      const double truth_l = true_cumulative(sc, sc.grid[g]);
      double hits = 0.0;
      for (const Replicate* r : used) hits += r->lower[g] <= truth_l && truth_l <= r->upper[g];
      char name[96];
      std::snprintf(name, sizeof name, "band coverage t=%.4g n=%d", sc.grid[g], n);
      report.checks.push_back(make_check(name, hits / count, lo, hi));
      per["band_coverage"].push_back(hits / count);
    }
    agg.push_back(per);
  }
  report.aggregates = {{"per_n", agg}};
  return report;
}

McReport normality_study(const StudyConfig& cfg) {
  McReport report = start_report("normality", cfg);
  if (refuse_degenerate(cfg, report)) return report;
  const Scenario& sc = cfg.scenario;
  const auto k = sc.sim.params.eta.size();
  json agg = json::array();
  for (int n : cfg.sample_sizes) {
    const auto reps = run_replicates(cfg, n, cfg.level);
    const auto used = usable(reps, n, cfg, report);
    const double count = static_cast<double>(used.size());
    const double ks_max = cfg.ks_coef / std::sqrt(count) + cfg.ks_slack;
    const double corr_max = cfg.corr_coef / std::sqrt(count);
    Eigen::MatrixXd mean_inv = Eigen::MatrixXd::Zero(k, k);
    for (const Replicate* r : used) mean_inv += r->sigma_inv / count;
    json per{{"n", n}, {"used", used.size()}, {"mean_sigma_inverse", matrix_json(mean_inv)}};
    for (Eigen::Index j = 0; j < k; ++j) {
      std::vector<double> zs;
      std::vector<double> dev;
      for (const Replicate* r : used) {
        zs.push_back(r->dev[j] / std::sqrt(mean_inv(j, j)));
        dev.push_back(r->dev[j]);
      }
      const double d = ks_normal(zs);
      const std::string tag = "eta[" + std::to_string(j) + "] n=" + std::to_string(n);
      report.checks.push_back(make_check("KS distance " + tag, d, 0.0, ks_max));
      per["ks"].push_back(d);
      for (std::size_t g = 0; g < sc.grid.size(); ++g) {
        std::vector<double> vn;
        for (const Replicate* r : used) vn.push_back(r->vn[g]);
        const double rho = correlation(dev, vn);
        char name[128];
        std::snprintf(name, sizeof name, "|corr(eta[%d], V_n(%.4g))| n=%d", static_cast<int>(j),
                      sc.grid[g], n);
        report.checks.push_back(make_check(name, std::abs(rho), 0.0, corr_max));
        per["correlations"].push_back({{"component", j}, {"t", sc.grid[g]}, {"corr", rho}});
      }
    }
    agg.push_back(per);
  }
  report.aggregates = {{"per_n", agg}};
  return report;
}

McReport variance_study(const StudyConfig& cfg) {
  McReport report = start_report("variance", cfg);
  if (refuse_degenerate(cfg, report)) return report;
  const Scenario& sc = cfg.scenario;
  const auto k = sc.sim.params.eta.size();
  json agg = json::array();
  for (int n : cfg.sample_sizes) {
    const auto reps = run_replicates(cfg, n, cfg.level);
    const auto used = usable(reps, n, cfg, report);
    const double count = static_cast<double>(used.size());
    json per{{"n", n}, {"used", used.size()}};
    if (k > 0) {
      Eigen::MatrixXd mean_inv = Eigen::MatrixXd::Zero(k, k);
      Eigen::VectorXd mean_dev = Eigen::VectorXd::Zero(k);
      for (const Replicate* r : used) {
        mean_inv += r->sigma_inv / count;
        mean_dev += r->dev / count;
      }
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
      for (const Replicate* r : used) {
        const Eigen::VectorXd d = r->dev - mean_dev;
        cov += d * d.transpose() / (count - 1.0);
      }
      const double rel = (cov - mean_inv).norm() / mean_inv.norm();
      report.checks.push_back(make_check(
          "eta covariance vs mean sigma^-1 (Frobenius, relative) n=" + std::to_string(n), rel,
          0.0, cfg.variance_tol));
      per["sampling_covariance"] = matrix_json(cov);
      per["mean_sigma_inverse"] = matrix_json(mean_inv);
    }
    for (std::size_t g = 0; g < sc.grid.size(); ++g) {
      std::vector<double> dev;
      std::vector<double> c;
      for (const Replicate* r : used) {
        dev.push_back(r->lambda_dev[g]);
        c.push_back(r->c[g]);
      }
      const double v = variance(dev);
      const double mc = mean(c);
      const double rel = std::abs(v - mc) / mc;
      char name[128];
      std::snprintf(name, sizeof name, "baseline variance vs mean c_hat t=%.4g n=%d", sc.grid[g],
                    n);
      report.checks.push_back(make_check(name, rel, 0.0, cfg.variance_tol));
      per["baseline"].push_back({{"t", sc.grid[g]}, {"variance", v}, {"mean_c_hat", mc}});
    }
    agg.push_back(per);
  }
  report.aggregates = {{"per_n", agg}};
  return report;
}

}  // namespace dynrec
