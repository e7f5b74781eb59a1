#include "dynrec/inference.hpp"

#include "dynrec/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dynrec {

namespace {

// The jump of lambda0_hat at each distinct event age of the index.
std::vector<double> jumps_at(const StepFunction& lambda, const std::vector<double>& ages) {
  std::vector<double> out(ages.size());
  for (std::size_t g = 0; g < ages.size(); ++g) out[g] = lambda.jump_at(ages[g]);
  return out;
}

}  // namespace

Eigen::MatrixXd sigma_hat(const RiskSetIndex& index, const Eta& eta_hat,
                          const StepFunction& lambda0_hat) {
  const int k = index.eta_dim();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(k, k);
  if (k == 0) return sigma;
  const auto& ages = index.distinct_ages();
  const RiskMoments m = index.moments(ages, eta_hat, 2);
  const std::vector<double> dl = jumps_at(lambda0_hat, ages);
  for (std::size_t g = 0; g < ages.size(); ++g) {
    if (!(m.s0[g] > 0.0) || dl[g] == 0.0) continue;
    const Eigen::VectorXd mean = m.s1[g] / m.s0[g];
    const Eigen::MatrixXd v = m.outer[g] / m.s0[g] - mean * mean.transpose();
    sigma += v * (m.s0[g] * dl[g]);
  }
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd sigma_hat(const Cohort& cohort, const Eta& eta_hat,
                          const StepFunction& lambda0_hat, const KappaModel& model) {
  return sigma_hat(RiskSetIndex(cohort, model), eta_hat, lambda0_hat);
}

double normal_quantile(double level) {
  if (!(level > 0.0 && level <= 1.0)) {
    throw std::invalid_argument("level must lie in (0, 1]");
  }
  constexpr double z_max = 1e6;
  if (level == 1.0) return z_max;
  const boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 0.5 + 0.5 * level);
}

Eigen::MatrixXd invert_sigma(const Eigen::MatrixXd& sigma, double* condition_number) {
  const int k = static_cast<int>(sigma.rows());
  if (k == 0) {
    if (condition_number) *condition_number = 1.0;
    return sigma;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (condition_number) *condition_number = cond;
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success || !(lo > 0.0) || !(cond < 1e14)) {
    std::ostringstream msg;
    msg << "sigma_hat is singular (condition number " << cond
        << "); check the model, e.g. for collinear covariates or a rho/link that "
           "does not depend on eta";
    throw SingularMatrixError(msg.str());
  }
  return llt.solve(Eigen::MatrixXd::Identity(k, k));
}

EtaInterval eta_confidence(const Eta& eta_hat, const Eigen::MatrixXd& sigma, int n,
                           double level) {
  if (n <= 0) throw std::invalid_argument("eta_confidence: n must be positive");
  EtaInterval out;
  out.level = level;
  out.estimate = eta_hat.stacked();
  const Eigen::MatrixXd inv = invert_sigma(sigma, &out.condition_number);
  const double z = normal_quantile(level);
  out.se = (inv.diagonal() / n).cwiseSqrt();
  out.lower = out.estimate - z * out.se;
  out.upper = out.estimate + z * out.se;
  return out;
}

PlugInCovariance::PlugInCovariance(const RiskSetIndex& index, const Eta& eta_hat,
                                   const StepFunction& lambda0_hat,
                                   const Eigen::MatrixXd& sigma)
    : n_(index.n()), k_(index.eta_dim()), lambda_(lambda0_hat), ages_(index.distinct_ages()) {
  sigma_inv_ = invert_sigma(sigma, &condition_);
  const RiskMoments m = index.moments(ages_, eta_hat, k_ > 0 ? 1 : 0);
  const std::vector<double> dl = jumps_at(lambda0_hat, ages_);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k_);
  double na = 0.0;
  for (std::size_t g = 0; g < ages_.size(); ++g) {
    if (m.s0[g] > 0.0 && dl[g] != 0.0) {
      if (k_ > 0) b += (m.s1[g] / m.s0[g]) * dl[g];
      na += dl[g] / m.s0[g];
    }
    b_cum_.push_back(b);
    na_cum_.push_back(na);
  }
}

std::size_t PlugInCovariance::count_upto(double t) const {
  return static_cast<std::size_t>(std::upper_bound(ages_.begin(), ages_.end(), t) -
                                  ages_.begin());
}

Eigen::VectorXd PlugInCovariance::b_hat(double t) const {
  const std::size_t c = count_upto(t);
  return c == 0 ? Eigen::VectorXd::Zero(k_) : b_cum_[c - 1];
}

double PlugInCovariance::c_hat(double t1, double t2) const {
  const std::size_t c = count_upto(std::min(t1, t2));
  double out = c == 0 ? 0.0 : na_cum_[c - 1];
  if (k_ > 0) out += b_hat(t1).dot(sigma_inv_ * b_hat(t2));
  return out;
}

std::vector<BandPoint> PlugInCovariance::lambda_band(std::span<const double> grid,
                                                     double level) const {
  const double z = normal_quantile(level);
  std::vector<BandPoint> out;
  out.reserve(grid.size());
  for (const double t : grid) {
    BandPoint p;
    p.t = t;
    p.estimate = lambda_(t);
    p.c = c_hat(t, t);
    const double half = z * std::sqrt(std::max(p.c, 0.0) / n_);
    p.lower = std::max(p.estimate - half, 0.0);
    p.upper = p.estimate + half;
    out.push_back(p);
  }
  return out;
}

InferenceResult infer(const RiskSetIndex& index, const FitResult& fit,
                      std::span<const double> grid, double level) {
  InferenceResult out;
  out.sigma_hat = fit.sigma_hat;
  out.eta_ci = eta_confidence(fit.eta_hat, fit.sigma_hat, fit.n, level);
  const PlugInCovariance cov(index, fit.eta_hat, fit.lambda0_hat, fit.sigma_hat);
  out.grid.assign(grid.begin(), grid.end());
  const auto m = static_cast<Eigen::Index>(grid.size());
  out.c_hat.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    out.b_hat.push_back(cov.b_hat(grid[a]));
    for (Eigen::Index b = 0; b < m; ++b) out.c_hat(a, b) = cov.c_hat(grid[a], grid[b]);
  }
  out.lambda_band = cov.lambda_band(grid, level);
  return out;
}

}  // namespace dynrec
