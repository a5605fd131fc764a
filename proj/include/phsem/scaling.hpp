#pragma once

#include <string>
#include <string_view>

namespace phsem {

enum class FamilyKind { Gompertz, Weibull, Identity };

// Parses "gompertz", "weibull", or "homogeneous"/"identity".
FamilyKind parse_family_kind(std::string_view name);
std::string family_name(FamilyKind kind);

// Scaling function h_beta multiplying the baseline generator, together with
// the induced time change between the inhomogeneous timeline t and the
// homogeneous timeline s = g_inv(t) = int_0^t h_beta(u) du.
//
//   Gompertz: h = exp(beta t),     g_inv = (exp(beta t) - 1) / beta
//   Weibull:  h = beta t^(beta-1), g_inv = t^beta
//   Identity: h = 1,               g_inv = t
//
// Every evaluation throws DomainError for t < 0, and for t == 0 where the
// Weibull intensity is infinite (beta < 1).
class ScalingFamily {
 public:
  ScalingFamily() = default;
  // Throws InputError unless beta > 0 (ignored for Identity).
  ScalingFamily(FamilyKind kind, double beta);

  static ScalingFamily identity() { return ScalingFamily(FamilyKind::Identity, 1.0); }

  FamilyKind kind() const { return kind_; }
  double beta() const { return beta_; }
  bool has_beta() const { return kind_ != FamilyKind::Identity; }
  ScalingFamily with_beta(double beta) const { return ScalingFamily(kind_, beta); }

  double h(double t) const;
  double log_h(double t) const;
  double dh_dbeta(double t) const;
  // (dh/dbeta) / h, evaluated without forming h.
  double dlog_h_dbeta(double t) const;

  double g_inv(double t) const;
  double g(double s) const;
  // d/dbeta g_inv(t) = int_0^t dh/dbeta du, in closed form. Weibull uses the
  // continuous extension 0 at t = 0.
  double dg_inv_dbeta(double t) const;

 private:
  void check_time(double t, bool singular_at_zero) const;

  FamilyKind kind_ = FamilyKind::Identity;
  double beta_ = 1.0;
};

}  // namespace phsem
