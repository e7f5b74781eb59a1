#include "dynrec/families.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace dynrec {

RhoFamily RhoFamily::identity() {
  RhoFamily f(Kind::Identity, 0);
  f.name_ = "identity";
  return f;
}

RhoFamily RhoFamily::power_count() {
  RhoFamily f(Kind::PowerCount, 1);
  f.name_ = "power-count";
  return f;
}

RhoFamily RhoFamily::exp_count() {
  RhoFamily f(Kind::ExpCount, 1);
  f.name_ = "exp-count";
  return f;
}

RhoFamily RhoFamily::custom(int q, Callback fn, bool time_dependent,
                            std::string name) {
  if (q < 0) throw std::invalid_argument("RhoFamily::custom: negative dimension");
  if (!fn) throw std::invalid_argument("RhoFamily::custom: empty callback");
  RhoFamily f(Kind::Custom, q);
  f.callback_ = std::move(fn);
  f.time_dependent_ = time_dependent;
  f.name_ = std::move(name);
  return f;
}

bool RhoFamily::in_domain(const Eigen::VectorXd& alpha) const {
  if (alpha.size() != dimension_) return false;
  if (!alpha.allFinite()) return false;
  if (kind_ == Kind::PowerCount) return alpha[0] > 0.0;
  return true;
}

ScalarDerivs RhoFamily::evaluate(double s, int count,
                                 const Eigen::VectorXd& alpha) const {
  if (alpha.size() != dimension_) {
    throw std::invalid_argument("RhoFamily: alpha has wrong dimension");
  }
  ScalarDerivs out;
  out.grad = Eigen::VectorXd::Zero(dimension_);
  out.hess = Eigen::MatrixXd::Zero(dimension_, dimension_);
  const double k = count;
  switch (kind_) {
    case Kind::Identity:
      out.value = 1.0;
      break;
    case Kind::PowerCount: {
      const double a = alpha[0];
      if (!(a > 0.0)) throw std::domain_error("power-count rho requires alpha > 0");
      out.value = std::pow(a, k);
      out.grad[0] = count == 0 ? 0.0 : k * std::pow(a, k - 1.0);
      out.hess(0, 0) = count <= 1 ? 0.0 : k * (k - 1.0) * std::pow(a, k - 2.0);
      break;
    }
    case Kind::ExpCount: {
      const double v = std::exp(alpha[0] * k);
      out.value = v;
      out.grad[0] = k * v;
      out.hess(0, 0) = k * k * v;
      break;
    }
    case Kind::Custom: {
      out = callback_(s, count, alpha);
      if (out.grad.size() != dimension_ || out.hess.rows() != dimension_ ||
          out.hess.cols() != dimension_) {
        throw std::runtime_error("custom rho returned derivatives of wrong shape");
      }
      if (count == 0 && std::abs(out.value - 1.0) > 1e-12) {
        throw std::runtime_error("custom rho violates rho(s, 0; alpha) == 1");
      }
      break;
    }
  }
  return out;
}

double RhoFamily::value(double s, int count, const Eigen::VectorXd& alpha) const {
  switch (kind_) {
    case Kind::Identity:
      return 1.0;
    case Kind::PowerCount:
      if (!(alpha[0] > 0.0)) throw std::domain_error("power-count rho requires alpha > 0");
      return std::pow(alpha[0], static_cast<double>(count));
    case Kind::ExpCount:
      return std::exp(alpha[0] * count);
    case Kind::Custom:
      return evaluate(s, count, alpha).value;
  }
  return 1.0;
}

std::string_view LinkFamily::name() const {
  switch (kind_) {
    case Kind::Identity:
      return "none";
    case Kind::Exponential:
      return "exp";
    case Kind::Softplus:
      return "softplus";
  }
  return "none";
}

LinkFamily::Derivs LinkFamily::evaluate(double v) const {
  switch (kind_) {
    case Kind::Identity:
      return {1.0, 0.0, 0.0};
    case Kind::Exponential: {
      const double e = std::exp(v);
      return {e, e, e};
    }
    case Kind::Softplus: {
      // log(1 + e^v) computed without overflow; sigma = logistic(v).
      const double value = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      const double sigma = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v));
      return {value, sigma, sigma * (1.0 - sigma)};
    }
  }
  return {1.0, 0.0, 0.0};
}

RhoFamily rho_from_name(std::string_view name) {
  if (name == "identity" || name == "none") return RhoFamily::identity();
  if (name == "power-count") return RhoFamily::power_count();
  if (name == "exp-count") return RhoFamily::exp_count();
  throw std::invalid_argument("unknown rho family '" + std::string(name) + "'");
}

LinkFamily link_from_name(std::string_view name) {
  if (name == "none" || name == "identity") return LinkFamily::identity();
  if (name == "exp") return LinkFamily::exponential();
  if (name == "softplus") return LinkFamily::softplus();
  throw std::invalid_argument("unknown link family '" + std::string(name) + "'");
}

Eigen::VectorXd Eta::stacked() const {
  Eigen::VectorXd v(size());
  v << alpha, beta;
  return v;
}

Eta Eta::split(const Eigen::VectorXd& stacked, int q) {
  if (q < 0 || q > stacked.size()) throw std::invalid_argument("Eta::split: bad q");
  Eta eta;
  eta.alpha = stacked.head(q);
  eta.beta = stacked.tail(stacked.size() - q);
  return eta;
}

Eta Eta::zeros(int q, int p) {
  return Eta{Eigen::VectorXd::Zero(q), Eigen::VectorXd::Zero(p)};
}

ScalarDerivs KappaModel::evaluate(double s, int count, const Eigen::VectorXd& x,
                                  const Eta& eta) const {
  const int q = alpha_dim();
  const int p = static_cast<int>(eta.beta.size());
  if (eta.alpha.size() != q) throw std::invalid_argument("kappa: alpha dimension mismatch");
  if (link.uses_covariates() && x.size() != p) {
    throw std::invalid_argument("kappa: beta/covariate dimension mismatch");
  }
  if (!link.uses_covariates() && p != 0) {
    throw std::invalid_argument("kappa: identity link takes no beta");
  }
  const ScalarDerivs r = rho.evaluate(s, count, eta.alpha);
  const LinkFamily::Derivs l = link.evaluate(link.uses_covariates() ? x.dot(eta.beta) : 0.0);

  ScalarDerivs out;
  out.value = r.value * l.value;
  out.grad.resize(q + p);
  out.hess.resize(q + p, q + p);
  out.grad.head(q) = r.grad * l.value;
  out.hess.topLeftCorner(q, q) = r.hess * l.value;
  if (p > 0) {
    out.grad.tail(p) = (r.value * l.d1) * x;
    out.hess.bottomRightCorner(p, p) = (r.value * l.d2) * (x * x.transpose());
    out.hess.topRightCorner(q, p) = l.d1 * (r.grad * x.transpose());
    out.hess.bottomLeftCorner(p, q) = out.hess.topRightCorner(q, p).transpose();
  }
  return out;
}

double KappaModel::value(double s, int count, const Eigen::VectorXd& x,
                         const Eta& eta) const {
  const double r = rho.value(s, count, eta.alpha);
  if (!link.uses_covariates()) return r;
  return r * link.evaluate(x.dot(eta.beta)).value;
}

}  // namespace dynrec
