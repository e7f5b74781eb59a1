#include "dynrec/estimate.hpp"

#include "dynrec/errors.hpp"
#include "dynrec/inference.hpp"
#include "dynrec/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dynrec {

namespace {

void check_eta(const Eta& eta, const KappaModel& model, int covariate_dim) {
  if (eta.alpha.size() != model.alpha_dim() ||
      eta.beta.size() != model.beta_dim(covariate_dim)) {
    throw std::invalid_argument("eta dimension does not match the model (expected q=" +
                                std::to_string(model.alpha_dim()) + ", p=" +
                                std::to_string(model.beta_dim(covariate_dim)) + ")");
  }
}

}  // namespace

double resolve_t_star(const Cohort& cohort) {
  if (cohort.t_star) return *cohort.t_star;
  const double s = cohort.s_star();
  double best = 0.0;
  double reach = 0.0;
  for (const UnitPath& u : cohort.units) {
    for (const Segment& seg : segments(u, s)) {
      if (seg.ends_at_event) best = std::max(best, seg.age_hi());
      reach = std::max(reach, seg.age_hi());
    }
  }
  return best > 0.0 ? best : reach;
}

double s0(const Cohort& cohort, double t, const Eta& eta, const KappaModel& model) {
  const double s = cohort.s_star();
  double total = 0.0;
  for (const UnitPath& u : cohort.units) total += at_risk_Y(u, s, t, eta, model);
  return total / cohort.size();
}

ScalarDerivs s0_derivs(const Cohort& cohort, double t, const Eta& eta,
                       const KappaModel& model) {
  const double s = cohort.s_star();
  ScalarDerivs acc;
  acc.grad = Eigen::VectorXd::Zero(eta.size());
  acc.hess = Eigen::MatrixXd::Zero(eta.size(), eta.size());
  for (const UnitPath& u : cohort.units) {
    const ScalarDerivs y = at_risk_Y_derivs(u, s, t, eta, model);
    acc.value += y.value;
    acc.grad += y.grad;
    acc.hess += y.hess;
  }
  const double n = cohort.size();
  acc.value /= n;
  acc.grad /= n;
  acc.hess /= n;
  return acc;
}

double QnMeasure::total_weight() const {
  double total = 0.0;
  for (const Atom& a : atoms) total += a.weight;
  return total;
}

QnMeasure qn_measure(const Cohort& cohort, double t, const Eta& eta,
                     const KappaModel& model) {
  const double s = cohort.s_star();
  QnMeasure q;
  std::vector<double> phi;
  double total = 0.0;
  for (int i = 0; i < cohort.size(); ++i) {
    const UnitPath& u = cohort.units[static_cast<std::size_t>(i)];
    for (const Segment& seg : segments(u, s)) {
      if (!(seg.slope > 0.0)) {
        throw DegenerateAgeError("effective age has zero slope on segment " +
                                 std::to_string(seg.index));
      }
      if (!(t > seg.age_lo && t <= seg.age_hi())) continue;
      const double v = std::min(seg.cal_lo + (t - seg.age_lo) / seg.slope, seg.cal_hi);
      const double value = model.value(v, seg.count, u.covariates.at(v), eta) / seg.slope;
      q.atoms.push_back({i, seg.index, v, 0.0});
      phi.push_back(value);
      total += value;
    }
  }
  q.s0 = total / cohort.size();
  for (std::size_t a = 0; a < q.atoms.size(); ++a) {
    q.atoms[a].weight = total > 0.0 ? phi[a] / total : 0.0;
  }
  return q;
}

QnMoments qn_moments(const Cohort& cohort, double t, const Eta& eta1,
                     const Eta& eta2, const KappaModel& model) {
  const QnMeasure q = qn_measure(cohort, t, eta1, model);
  if (!(q.s0 > 0.0)) {
    throw EmptyRiskSetError("S0 is zero at age " + std::to_string(t));
  }
  const int k = eta2.size();
  QnMoments m;
  m.q1 = Eigen::VectorXd::Zero(k);
  m.q2 = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(k, k);
  for (const QnMeasure::Atom& a : q.atoms) {
    const UnitPath& u = cohort.units[static_cast<std::size_t>(a.unit)];
    const ScalarDerivs kap =
        model.evaluate(a.calendar, a.segment - 1, u.covariates.at(a.calendar), eta2);
    const Eigen::VectorXd ratio = kap.grad / kap.value;
    m.q1 += a.weight * ratio;
    m.q2 += a.weight * (kap.hess / kap.value);
    second += a.weight * (ratio * ratio.transpose());
  }
  m.v = second - m.q1 * m.q1.transpose();
  return m;
}

RiskSetIndex::RiskSetIndex(const Cohort& cohort, const KappaModel& model,
                           std::optional<double> t_star)
    : cohort_(&cohort), model_(model) {
  cohort.validate();
  n_ = cohort.size();
  eta_dim_ = model.eta_dim(cohort.covariate_dim());
  t_star_ = t_star ? *t_star : resolve_t_star(cohort);
  if (!(t_star_ >= 0.0 && std::isfinite(t_star_))) {
    throw std::invalid_argument("t_star must be finite and nonnegative");
  }
  const double s = cohort.s_star();

  std::vector<std::pair<double, std::size_t>> event_ages;
  for (int i = 0; i < n_; ++i) {
    const UnitPath& u = cohort.units[static_cast<std::size_t>(i)];
    for (const AgePiece& p : age_pieces(u, s)) {
      if (!(p.slope > 0.0)) {
        throw DegenerateAgeError("unit " + std::to_string(i) +
                                 ": effective age has zero slope on segment " +
                                 std::to_string(p.segment));
      }
      pieces_.push_back({i, p.count, p.cal_lo, p.cal_hi, p.age_lo, p.age_hi, p.slope,
                         p.covariate_index});
    }
    for (int j = 1; j <= u.event_count(); ++j) {
      const Segment seg = segment(u, j);
      const double age = seg.age_hi();
      if (age > t_star_) continue;
      Event e;
      e.unit = i;
      e.count = j - 1;
      e.calendar = seg.cal_hi;
      e.age = age;
      // left-continuous covariate at the event time
      const auto& times = u.covariates.times();
      e.covariate_index = static_cast<std::size_t>(
          std::lower_bound(times.begin() + 1, times.end(), seg.cal_hi) - times.begin() - 1);
      events_.push_back(e);
      event_ages.emplace_back(age, events_.size() - 1);
    }
  }

  std::sort(event_ages.begin(), event_ages.end());
  for (const auto& [age, id] : event_ages) {
    if (ages_.empty() || ages_.back() != age) {
      ages_.push_back(age);
      multiplicity_.push_back(0);
    }
    ++multiplicity_.back();
    events_[id].group = ages_.size() - 1;
  }

  by_lo_.resize(pieces_.size());
  std::iota(by_lo_.begin(), by_lo_.end(), std::size_t{0});
  by_hi_ = by_lo_;
  std::stable_sort(by_lo_.begin(), by_lo_.end(), [this](std::size_t a, std::size_t b) {
    return pieces_[a].age_lo < pieces_[b].age_lo;
  });
  std::stable_sort(by_hi_.begin(), by_hi_.end(), [this](std::size_t a, std::size_t b) {
    return pieces_[a].age_hi < pieces_[b].age_hi;
  });
}

const Eigen::VectorXd& RiskSetIndex::covariate(int unit, std::size_t index) const {
  return cohort_->units[static_cast<std::size_t>(unit)].covariates.values()[index];
}

RiskMoments RiskSetIndex::moments_direct(std::span<const double> ages, const Eta& eta,
                                         int order) const {
  const int k = eta_dim_;
  RiskMoments m;
  for (const double w : ages) {
    double total = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(k, k);
    for (const Piece& p : pieces_) {
      if (!(w > p.age_lo && w <= p.age_hi)) continue;
      const double v = std::min(p.cal_lo + (w - p.age_lo) / p.slope, p.cal_hi);
      const ScalarDerivs kap = model_.evaluate(v, p.count, covariate(p.unit, p.covariate_index), eta);
      total += kap.value / p.slope;
      if (order >= 1) g += kap.grad / p.slope;
      if (order >= 2) {
        h += kap.hess / p.slope;
        o += kap.grad * kap.grad.transpose() / (kap.value * p.slope);
      }
    }
    m.total.push_back(total);
    m.s0.push_back(total / n_);
    if (order >= 1) m.s1.push_back(g / n_);
    if (order >= 2) {
      m.s2.push_back(h / n_);
      m.outer.push_back(o / n_);
    }
  }
  return m;
}

RiskMoments RiskSetIndex::moments(std::span<const double> ages, const Eta& eta,
                                  int order) const {
  check_eta(eta, model_, cohort_->covariate_dim());
  if (!std::is_sorted(ages.begin(), ages.end())) {
    throw std::invalid_argument("RiskSetIndex::moments: ages must be sorted");
  }
  if (model_.rho.time_dependent()) return moments_direct(ages, eta, order);

  const int k = eta_dim_;
  const std::size_t P = pieces_.size();
  // Per-piece weights kappa / E'.
  std::vector<double> wv(P);
  std::vector<Eigen::VectorXd> wg;
  std::vector<Eigen::MatrixXd> wh;
  std::vector<Eigen::MatrixXd> wo;
  if (order >= 1) wg.resize(P);
  if (order >= 2) {
    wh.resize(P);
    wo.resize(P);
  }
  for (std::size_t i = 0; i < P; ++i) {
    const Piece& p = pieces_[i];
    const Eigen::VectorXd& x = covariate(p.unit, p.covariate_index);
    if (order == 0) {
      wv[i] = model_.value(p.cal_hi, p.count, x, eta) / p.slope;
      continue;
    }
    const ScalarDerivs kap = model_.evaluate(p.cal_hi, p.count, x, eta);
    wv[i] = kap.value / p.slope;
    wg[i] = kap.grad / p.slope;
    if (order >= 2) {
      wh[i] = kap.hess / p.slope;
      wo[i] = kap.grad * kap.grad.transpose() / (kap.value * p.slope);
    }
  }

  RiskMoments m;
  m.total.reserve(ages.size());
  m.s0.reserve(ages.size());
  double total = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(k, k);
  std::size_t next_in = 0;
  std::size_t next_out = 0;
  std::size_t active = 0;
  for (const double w : ages) {
    // Piece p covers w iff age_lo < w <= age_hi.
    while (next_in < P && pieces_[by_lo_[next_in]].age_lo < w) {
      const std::size_t i = by_lo_[next_in++];
      total += wv[i];
      if (order >= 1) g += wg[i];
      if (order >= 2) {
        h += wh[i];
        o += wo[i];
      }
      ++active;
    }
    while (next_out < P && pieces_[by_hi_[next_out]].age_hi < w) {
      const std::size_t i = by_hi_[next_out++];
      total -= wv[i];
      if (order >= 1) g -= wg[i];
      if (order >= 2) {
        h -= wh[i];
        o -= wo[i];
      }
      --active;
    }
    if (active == 0) {
      total = 0.0;
      g.setZero();
      h.setZero();
      o.setZero();
    }
    m.total.push_back(total);
    m.s0.push_back(total / n_);
    if (order >= 1) m.s1.push_back(g / n_);
    if (order >= 2) {
      m.s2.push_back(h / n_);
      m.outer.push_back(o / n_);
    }
  }
  return m;
}

ProfileEval RiskSetIndex::evaluate(const Eta& eta, int order) const {
  check_eta(eta, model_, cohort_->covariate_dim());
  const int k = eta_dim_;
  ProfileEval out;
  out.score = Eigen::VectorXd::Zero(k);
  out.hessian = Eigen::MatrixXd::Zero(k, k);
  if (!model_.eta_in_domain(eta)) {
    out.loglik = -std::numeric_limits<double>::infinity();
    return out;
  }
  const RiskMoments m = moments(ages_, eta, order);

  double loglik = 0.0;
  for (const Event& e : events_) {
    const Eigen::VectorXd& x = covariate(e.unit, e.covariate_index);
    if (order == 0) {
      loglik += std::log(model_.value(e.calendar, e.count, x, eta));
      continue;
    }
    const ScalarDerivs kap = model_.evaluate(e.calendar, e.count, x, eta);
    loglik += std::log(kap.value);
    const Eigen::VectorXd ratio = kap.grad / kap.value;
    out.score += ratio;
    if (order >= 2) out.hessian += kap.hess / kap.value - ratio * ratio.transpose();
  }
  for (std::size_t g = 0; g < ages_.size(); ++g) {
    if (!(m.s0[g] > 0.0)) {
      throw EmptyRiskSetError("S0 is zero at observed event age " + std::to_string(ages_[g]));
    }
    const double d = multiplicity_[g];
    loglik -= d * std::log(m.s0[g]);
    if (order >= 1) {
      const Eigen::VectorXd ratio = m.s1[g] / m.s0[g];
      out.score -= d * ratio;
      if (order >= 2) out.hessian -= d * (m.s2[g] / m.s0[g] - ratio * ratio.transpose());
    }
  }
  out.loglik = loglik;
  out.score /= n_;
  out.hessian /= n_;
  return out;
}

double log_partial_likelihood(const Cohort& cohort, const Eta& eta,
                              const KappaModel& model) {
  return RiskSetIndex(cohort, model).evaluate(eta, 0).loglik;
}

Eigen::VectorXd score(const Cohort& cohort, const Eta& eta, const KappaModel& model) {
  return RiskSetIndex(cohort, model).evaluate(eta, 1).score;
}

Eigen::MatrixXd hessian(const Cohort& cohort, const Eta& eta, const KappaModel& model) {
  return RiskSetIndex(cohort, model).evaluate(eta, 2).hessian;
}

Eta neutral_eta(const KappaModel& model, int covariate_dim) {
  Eta eta = Eta::zeros(model.alpha_dim(), model.beta_dim(covariate_dim));
  if (model.rho.kind() == RhoFamily::Kind::PowerCount) eta.alpha[0] = 1.0;
  return eta;
}

EtaFit fit_eta(const RiskSetIndex& index, const FitOptions& options) {
  const KappaModel& model = index.model();
  const int q = model.alpha_dim();
  EtaFit fit;
  fit.eta = options.init ? *options.init
                         : neutral_eta(model, index.cohort().covariate_dim());
  check_eta(fit.eta, model, index.cohort().covariate_dim());
  if (!model.eta_in_domain(fit.eta)) {
    throw std::invalid_argument("fit_eta: initial eta outside the domain of rho");
  }
  if (index.eta_dim() == 0) {
    fit.converged = true;
    return fit;
  }
  if (index.events().empty()) {
    throw std::invalid_argument("fit_eta: no events with age <= t_star");
  }

  ProfileEval cur = index.evaluate(fit.eta, 2);
  for (int iter = 0;; ++iter) {
    const double norm = cur.score.lpNorm<Eigen::Infinity>();
    fit.final_score_norm = norm;
    EtaFit::Step step{iter, cur.loglik, norm, 0, false};
    if (norm < options.tol) {
      fit.converged = true;
      fit.trace.push_back(step);
      break;
    }
    if (iter >= options.max_iter) {
      fit.trace.push_back(step);
      break;
    }

    Eigen::VectorXd direction;
    const Eigen::MatrixXd neg = -cur.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    if (llt.info() == Eigen::Success) direction = llt.solve(cur.score);
    if (llt.info() != Eigen::Success || !direction.allFinite()) {
      direction = 0.1 * cur.score;
      step.steepest_ascent = true;
      fit.used_steepest_ascent = true;
    }

    const Eigen::VectorXd base = fit.eta.stacked();
    const double slack = 1e-12 * (1.0 + std::abs(cur.loglik));
    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= 30; ++h, scale *= 0.5) {
      const Eta trial = Eta::split(base + scale * direction, q);
      if (!model.eta_in_domain(trial)) continue;
      ProfileEval next = index.evaluate(trial, 0);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - slack) {
        fit.eta = trial;
        cur = index.evaluate(trial, 2);
        step.halvings = h;
        accepted = true;
        break;
      }
    }
    fit.trace.push_back(step);
    fit.iterations = iter + 1;
    if (!accepted) {
      fit.line_search_failed = true;
      fit.final_score_norm = norm;
      break;
    }
  }
  return fit;
}

EtaFit fit_eta(const Cohort& cohort, const KappaModel& model, const FitOptions& options) {
  const RiskSetIndex index(cohort, model, options.t_star);
  return fit_eta(index, options);
}

StepFunction abn_baseline(const RiskSetIndex& index, const Eta& eta) {
  const auto& ages = index.distinct_ages();
  const RiskMoments m = index.moments(ages, eta, 0);
  std::vector<double> jumps(ages.size());
  for (std::size_t g = 0; g < ages.size(); ++g) {
    jumps[g] = m.total[g] > 0.0 ? index.multiplicity()[g] / m.total[g] : 0.0;
  }
  return StepFunction(ages, std::move(jumps), 0.0);
}

StepFunction abn_baseline(const Cohort& cohort, const Eta& eta, const KappaModel& model) {
  return abn_baseline(RiskSetIndex(cohort, model), eta);
}

SurvivorEstimate product_limit(const StepFunction& cumulative_hazard) {
  SurvivorEstimate out;
  const auto loc = cumulative_hazard.locations();
  const auto jump = cumulative_hazard.jumps();
  std::vector<double> values(loc.size());
  double current = 1.0;
  for (std::size_t g = 0; g < loc.size(); ++g) {
    double factor = 1.0 - jump[g];
    if (factor < 0.0) {
      factor = 0.0;
      out.clipped = true;
    }
    current *= factor;
    values[g] = current;
  }
  out.survivor = StepFunction::from_values({loc.begin(), loc.end()}, std::move(values), 1.0);
  return out;
}

SurvivorEstimate ple_survivor(const Cohort& cohort, const Eta& eta, const KappaModel& model) {
  return product_limit(abn_baseline(cohort, eta, model));
}

FitResult fit(const Cohort& cohort, const KappaModel& model, const FitOptions& options) {
  const RiskSetIndex index(cohort, model, options.t_star);
  FitResult out;
  out.n = index.n();
  out.t_star = index.t_star();
  out.event_count = static_cast<int>(index.events().size());
  const int k = index.eta_dim();
  if (k > 0 && index.events().empty()) {
    out.eta_hat = options.init ? *options.init : neutral_eta(model, cohort.covariate_dim());
    out.lambda0_hat = StepFunction();
    out.survivor = product_limit(out.lambda0_hat);
    out.sigma_hat = Eigen::MatrixXd::Zero(k, k);
    out.converged = false;
    out.degenerate = true;
    return out;
  }
  const EtaFit eta_fit = fit_eta(index, options);
  out.eta_hat = eta_fit.eta;
  out.iterations = eta_fit.iterations;
  out.final_score_norm = eta_fit.final_score_norm;
  out.converged = eta_fit.converged;
  out.used_steepest_ascent = eta_fit.used_steepest_ascent;
  out.lambda0_hat = abn_baseline(index, out.eta_hat);
  out.survivor = product_limit(out.lambda0_hat);
  out.sigma_hat = sigma_hat(index, out.eta_hat, out.lambda0_hat);
  if (k > 0) {
    const Eigen::MatrixXd h = index.evaluate(out.eta_hat, 2).hessian;
    out.degenerate = h.cwiseAbs().maxCoeff() < 1e-12;
  }
  return out;
}

}  // namespace dynrec
