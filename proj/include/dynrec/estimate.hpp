#pragma once

// Semiparametric estimation: pooled at-risk moments S0 and its eta
// derivatives, the Q_n measure over unit-segment pairs, the profile partial
// likelihood with exact score and Hessian, Newton-Raphson for eta, and the
// generalized Aalen-Breslow-Nelson and product-limit estimators.

#include "dynrec/families.hpp"
#include "dynrec/model.hpp"
#include "dynrec/step_function.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace dynrec {

// t_star from the cohort, else the largest observed event age.
double resolve_t_star(const Cohort& cohort);

// S0(s*, t; eta) = (1/n) sum_i Y_i(s*, t; eta), with its eta derivatives.
// Direct enumeration over units.
double s0(const Cohort& cohort, double t, const Eta& eta, const KappaModel& model);
ScalarDerivs s0_derivs(const Cohort& cohort, double t, const Eta& eta,
                       const KappaModel& model);

// Discrete probability on unit-segment pairs (i, j) whose age range covers t.
struct QnMeasure {
  struct Atom {
    int unit = 0;
    int segment = 1;
    double calendar = 0.0;  // E_ij^{-1}(t)
    double weight = 0.0;
  };
  std::vector<Atom> atoms;
  double s0 = 0.0;

  double total_weight() const;
};

QnMeasure qn_measure(const Cohort& cohort, double t, const Eta& eta,
                     const KappaModel& model);

struct QnMoments {
  Eigen::VectorXd q1;  // Q_n(eta1)[kappa_dot / kappa (eta2)]
  Eigen::MatrixXd q2;  // Q_n(eta1)[kappa_ddot / kappa (eta2)]
  Eigen::MatrixXd v;   // Q_n(eta1)[(kappa_dot/kappa)^2] - q1 q1^T
};

// Throws EmptyRiskSetError when S0(s*, t; eta1) == 0.
QnMoments qn_moments(const Cohort& cohort, double t, const Eta& eta1,
                     const Eta& eta2, const KappaModel& model);

// Pooled moments on a set of sorted query ages.
struct RiskMoments {
  std::vector<double> total;            // sum_i Y_i
  std::vector<double> s0;               // total / n
  std::vector<Eigen::VectorXd> s1;      // dS0/deta
  std::vector<Eigen::MatrixXd> s2;      // d2S0/deta2
  std::vector<Eigen::MatrixXd> outer;   // (1/n) sum kappa_dot kappa_dot^T / (kappa E')
};

struct ProfileEval {
  double loglik = 0.0;      // l_P
  Eigen::VectorXd score;    // grad(l_P / n)
  Eigen::MatrixXd hessian;  // hess(l_P / n)
};

// The cohort's age pieces and events at s = s*, sorted once; every
// per-eta quantity is a sweep over this index.
class RiskSetIndex {
 public:
  struct Event {
    int unit = 0;
    int count = 0;
    double calendar = 0.0;
    double age = 0.0;
    std::size_t covariate_index = 0;
    std::size_t group = 0;  // index into distinct_ages()
  };

  RiskSetIndex(const Cohort& cohort, const KappaModel& model,
               std::optional<double> t_star = std::nullopt);

  int n() const { return n_; }
  int eta_dim() const { return eta_dim_; }
  int alpha_dim() const { return model_.alpha_dim(); }
  double t_star() const { return t_star_; }
  const KappaModel& model() const { return model_; }
  const Cohort& cohort() const { return *cohort_; }

  // Events with age <= t_star.
  const std::vector<Event>& events() const { return events_; }
  const std::vector<double>& distinct_ages() const { return ages_; }
  const std::vector<int>& multiplicity() const { return multiplicity_; }

  // order 0: S0; 1: + first derivative; 2: + second derivative and the
  // outer-product moment.
  RiskMoments moments(std::span<const double> sorted_ages, const Eta& eta,
                      int order) const;

  // order as above; loglik is -inf outside the domain of rho.
  ProfileEval evaluate(const Eta& eta, int order) const;

 private:
  struct Piece {
    int unit = 0;
    int count = 0;
    double cal_lo = 0.0;
    double cal_hi = 0.0;
    double age_lo = 0.0;
    double age_hi = 0.0;
    double slope = 1.0;
    std::size_t covariate_index = 0;
  };

  const Eigen::VectorXd& covariate(int unit, std::size_t index) const;
  RiskMoments moments_direct(std::span<const double> ages, const Eta& eta,
                             int order) const;

  const Cohort* cohort_;
  KappaModel model_;
  int n_ = 0;
  int eta_dim_ = 0;
  double t_star_ = 0.0;
  std::vector<Piece> pieces_;
  std::vector<std::size_t> by_lo_;
  std::vector<std::size_t> by_hi_;
  std::vector<Event> events_;
  std::vector<double> ages_;
  std::vector<int> multiplicity_;
};

double log_partial_likelihood(const Cohort& cohort, const Eta& eta,
                              const KappaModel& model);
Eigen::VectorXd score(const Cohort& cohort, const Eta& eta, const KappaModel& model);
Eigen::MatrixXd hessian(const Cohort& cohort, const Eta& eta, const KappaModel& model);

struct FitOptions {
  std::optional<Eta> init;
  std::optional<double> t_star;
  double tol = 1e-8;
  int max_iter = 100;
};

struct EtaFit {
  struct Step {
    int iteration = 0;
    double loglik = 0.0;
    double score_norm = 0.0;
    int halvings = 0;
    bool steepest_ascent = false;
  };

  Eta eta;
  int iterations = 0;
  double final_score_norm = 0.0;
  bool converged = false;
  bool used_steepest_ascent = false;
  bool line_search_failed = false;
  std::vector<Step> trace;
};

// Neutral eta: rho == 1 and psi(0) for each family.
Eta neutral_eta(const KappaModel& model, int covariate_dim);

EtaFit fit_eta(const RiskSetIndex& index, const FitOptions& options = {});
EtaFit fit_eta(const Cohort& cohort, const KappaModel& model,
               const FitOptions& options = {});

// Jumps (#events at w) / (n S0(s*, w; eta)) at each distinct event age
// w <= t*; 0/0 = 0.
StepFunction abn_baseline(const RiskSetIndex& index, const Eta& eta);
StepFunction abn_baseline(const Cohort& cohort, const Eta& eta, const KappaModel& model);

struct SurvivorEstimate {
  StepFunction survivor;
  bool clipped = false;  // some factor 1 - dLambda went negative
};

SurvivorEstimate product_limit(const StepFunction& cumulative_hazard);
SurvivorEstimate ple_survivor(const Cohort& cohort, const Eta& eta,
                              const KappaModel& model);

struct FitResult {
  Eta eta_hat;
  StepFunction lambda0_hat;
  SurvivorEstimate survivor;
  Eigen::MatrixXd sigma_hat;
  int iterations = 0;
  double final_score_norm = 0.0;
  bool converged = false;
  bool used_steepest_ascent = false;
  // k > 0 but the profile likelihood is flat in eta.
  bool degenerate = false;
  double t_star = 0.0;
  int n = 0;
  int event_count = 0;  // events with age <= t*
};

FitResult fit(const Cohort& cohort, const KappaModel& model,
              const FitOptions& options = {});

}  // namespace dynrec
