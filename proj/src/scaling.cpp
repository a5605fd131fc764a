#include "phsem/scaling.hpp"

#include <cmath>
#include <limits>

#include "phsem/errors.hpp"

namespace phsem {

FamilyKind parse_family_kind(std::string_view name) {
  if (name == "gompertz") return FamilyKind::Gompertz;
  if (name == "weibull") return FamilyKind::Weibull;
  if (name == "homogeneous" || name == "identity") return FamilyKind::Identity;
  throw InputError("unknown scaling family '" + std::string(name) +
                   "' (expected gompertz, weibull, or homogeneous)");
}

std::string family_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Gompertz: return "gompertz";
    case FamilyKind::Weibull: return "weibull";
    case FamilyKind::Identity: return "homogeneous";
  }
  return "unknown";
}

ScalingFamily::ScalingFamily(FamilyKind kind, double beta) : kind_(kind), beta_(beta) {
  if (kind_ != FamilyKind::Identity && !(std::isfinite(beta) && beta > 0.0)) {
    throw InputError("scaling parameter beta must be finite and > 0");
  }
}

void ScalingFamily::check_time(double t, bool singular_at_zero) const {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
  if (singular_at_zero && t == 0.0) {
    throw DomainError("Weibull scaling is singular at t = 0 for this beta");
  }
}

double ScalingFamily::h(double t) const {
  switch (kind_) {
    case FamilyKind::Gompertz:
      check_time(t, false);
      return std::exp(beta_ * t);
    case FamilyKind::Weibull:
      check_time(t, beta_ < 1.0);
      return beta_ * std::pow(t, beta_ - 1.0);
    case FamilyKind::Identity:
      check_time(t, false);
      return 1.0;
  }
  return 1.0;
}

double ScalingFamily::log_h(double t) const {
  switch (kind_) {
    case FamilyKind::Gompertz:
      check_time(t, false);
      return beta_ * t;
    case FamilyKind::Weibull:
      check_time(t, beta_ < 1.0);
      if (beta_ == 1.0) return 0.0;
      return std::log(beta_) + (beta_ - 1.0) * std::log(t);
    case FamilyKind::Identity:
      check_time(t, false);
      return 0.0;
  }
  return 0.0;
}

double ScalingFamily::dh_dbeta(double t) const {
  switch (kind_) {
    case FamilyKind::Gompertz:
      check_time(t, false);
      return t * std::exp(beta_ * t);
    case FamilyKind::Weibull:
      check_time(t, beta_ <= 1.0);
      if (t == 0.0) return 0.0;
      return std::pow(t, beta_ - 1.0) * (1.0 + beta_ * std::log(t));
    case FamilyKind::Identity:
      check_time(t, false);
      return 0.0;
  }
  return 0.0;
}

double ScalingFamily::dlog_h_dbeta(double t) const {
  switch (kind_) {
    case FamilyKind::Gompertz:
      check_time(t, false);
      return t;
    case FamilyKind::Weibull:
      check_time(t, true);
      return 1.0 / beta_ + std::log(t);
    case FamilyKind::Identity:
      check_time(t, false);
      return 0.0;
  }
  return 0.0;
}

double ScalingFamily::g_inv(double t) const {
  check_time(t, false);
  switch (kind_) {
    case FamilyKind::Gompertz: return std::expm1(beta_ * t) / beta_;
    case FamilyKind::Weibull: return std::pow(t, beta_);
    case FamilyKind::Identity: return t;
  }
  return t;
}

double ScalingFamily::g(double s) const {
  check_time(s, false);
  switch (kind_) {
    case FamilyKind::Gompertz: return std::log1p(beta_ * s) / beta_;
    case FamilyKind::Weibull: return std::pow(s, 1.0 / beta_);
    case FamilyKind::Identity: return s;
  }
  return s;
}

double ScalingFamily::dg_inv_dbeta(double t) const {
  check_time(t, false);
  switch (kind_) {
    case FamilyKind::Gompertz: {
      // (beta t e^{beta t} - expm1(beta t)) / beta^2, which cancels badly for
      // small beta t; there it equals t^2 * sum_{k>=2} (k-1) x^(k-2) / k!.
      const double x = beta_ * t;
      if (std::abs(x) < 0.1) {
        double power = 1.0;
        double factorial = 2.0;
        double sum = 0.0;
        for (int k = 2; k < 20; ++k) {
          sum += (k - 1) / factorial * power;
          power *= x;
          factorial *= (k + 1);
        }
        return t * t * sum;
      }
      return (x * std::exp(x) - std::expm1(x)) / (beta_ * beta_);
    }
    case FamilyKind::Weibull:
      if (t == 0.0) return 0.0;
      return std::pow(t, beta_) * std::log(t);
    case FamilyKind::Identity: return 0.0;
  }
  return 0.0;
}

}  // namespace phsem
