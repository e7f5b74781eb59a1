#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>

namespace dynrec {

// Value, gradient and Hessian of a scalar function of a parameter vector.
struct ScalarDerivs {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Count modulation rho(s, k; alpha). rho(s, 0; alpha) == 1 always.
class RhoFamily {
 public:
  enum class Kind { Identity, PowerCount, ExpCount, Custom };
  using Callback =
      std::function<ScalarDerivs(double s, int count, const Eigen::VectorXd& alpha)>;

  static RhoFamily identity();
  // rho = alpha_1^k, alpha_1 > 0.
  static RhoFamily power_count();
  // rho = exp(alpha_1 k).
  static RhoFamily exp_count();
  // User-supplied family of dimension q. When time_dependent is false the
  // callback must not depend on s; that lets integrals over age use exact
  // per-piece sums.
  static RhoFamily custom(int q, Callback fn, bool time_dependent,
                          std::string name = "custom");

  Kind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  bool time_dependent() const { return time_dependent_; }
  const std::string& name() const { return name_; }
  bool in_domain(const Eigen::VectorXd& alpha) const;

  ScalarDerivs evaluate(double s, int count, const Eigen::VectorXd& alpha) const;
  double value(double s, int count, const Eigen::VectorXd& alpha) const;

 private:
  RhoFamily(Kind kind, int dimension) : kind_(kind), dimension_(dimension) {}

  Kind kind_ = Kind::Identity;
  int dimension_ = 0;
  bool time_dependent_ = false;
  Callback callback_;
  std::string name_;
};

// Link psi applied to the linear predictor X(s) beta.
class LinkFamily {
 public:
  enum class Kind { Identity, Exponential, Softplus };

  struct Derivs {
    double value;
    double d1;
    double d2;
  };

  static LinkFamily identity() { return LinkFamily(Kind::Identity); }
  static LinkFamily exponential() { return LinkFamily(Kind::Exponential); }
  static LinkFamily softplus() { return LinkFamily(Kind::Softplus); }

  Kind kind() const { return kind_; }
  // Identity link ignores covariates and carries no beta.
  bool uses_covariates() const { return kind_ != Kind::Identity; }
  std::string_view name() const;
  Derivs evaluate(double v) const;

 private:
  explicit LinkFamily(Kind kind) : kind_(kind) {}
  Kind kind_;
};

RhoFamily rho_from_name(std::string_view name);
LinkFamily link_from_name(std::string_view name);

// eta = (alpha, beta), stacked alpha first.
struct Eta {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  int size() const { return static_cast<int>(alpha.size() + beta.size()); }
  Eigen::VectorXd stacked() const;
  static Eta split(const Eigen::VectorXd& stacked, int q);
  static Eta zeros(int q, int p);
};

// The pair (rho, psi) that forms kappa(s; eta) = rho(s, N(s-); alpha) psi(X(s) beta).
struct KappaModel {
  RhoFamily rho = RhoFamily::identity();
  LinkFamily link = LinkFamily::identity();

  int alpha_dim() const { return rho.dimension(); }
  int beta_dim(int covariate_dim) const {
    return link.uses_covariates() ? covariate_dim : 0;
  }
  int eta_dim(int covariate_dim) const {
    return alpha_dim() + beta_dim(covariate_dim);
  }
  bool eta_in_domain(const Eta& eta) const { return rho.in_domain(eta.alpha); }

  // kappa at calendar time s given the prior event count and the covariate
  // row in force; gradient and Hessian are with respect to stacked eta.
  ScalarDerivs evaluate(double s, int count, const Eigen::VectorXd& x,
                        const Eta& eta) const;
  double value(double s, int count, const Eigen::VectorXd& x,
               const Eta& eta) const;
};

}  // namespace dynrec
