#pragma once

// Plug-in covariance estimators for eta_hat and Lambda0_hat, Wald intervals
// for eta and pointwise bands for Lambda0.

#include "dynrec/estimate.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace dynrec {

// sum over jump ages w of Q_n[(kappa_dot/kappa - S1/S0)^2] S0 dLambda0_hat(w).
Eigen::MatrixXd sigma_hat(const RiskSetIndex& index, const Eta& eta_hat,
                          const StepFunction& lambda0_hat);
Eigen::MatrixXd sigma_hat(const Cohort& cohort, const Eta& eta_hat,
                          const StepFunction& lambda0_hat, const KappaModel& model);

// Two-sided standard normal quantile z_{1-a/2} for level 1-a. Level 1 maps
// to a large finite z.
double normal_quantile(double level);

struct EtaInterval {
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double level = 0.95;
  double condition_number = 1.0;
};

// Throws SingularMatrixError when sigma is not positive definite.
Eigen::MatrixXd invert_sigma(const Eigen::MatrixXd& sigma, double* condition_number = nullptr);

EtaInterval eta_confidence(const Eta& eta_hat, const Eigen::MatrixXd& sigma, int n,
                           double level);

struct BandPoint {
  double t = 0.0;
  double estimate = 0.0;
  double c = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// b_hat and c_hat tabulated once on the jump ages of lambda0_hat.
class PlugInCovariance {
 public:
  PlugInCovariance(const RiskSetIndex& index, const Eta& eta_hat,
                   const StepFunction& lambda0_hat, const Eigen::MatrixXd& sigma);

  int n() const { return n_; }
  const Eigen::MatrixXd& sigma_inverse() const { return sigma_inv_; }
  double condition_number() const { return condition_; }

  Eigen::VectorXd b_hat(double t) const;
  double c_hat(double t1, double t2) const;
  std::vector<BandPoint> lambda_band(std::span<const double> grid, double level) const;

 private:
  std::size_t count_upto(double t) const;

  int n_ = 0;
  int k_ = 0;
  StepFunction lambda_;
  std::vector<double> ages_;
  std::vector<Eigen::VectorXd> b_cum_;  // b_hat at ages_[g]
  std::vector<double> na_cum_;          // sum dLambda/S0 up to ages_[g]
  Eigen::MatrixXd sigma_inv_;
  double condition_ = 1.0;
};

struct InferenceResult {
  Eigen::MatrixXd sigma_hat;
  EtaInterval eta_ci;
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> b_hat;
  Eigen::MatrixXd c_hat;  // on grid x grid
  std::vector<BandPoint> lambda_band;
};

// Everything above for a fit. Throws SingularMatrixError when k > 0 and
// sigma_hat is singular.
InferenceResult infer(const RiskSetIndex& index, const FitResult& fit,
                      std::span<const double> grid, double level);

}  // namespace dynrec
