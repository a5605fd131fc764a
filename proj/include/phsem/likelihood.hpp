#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "phsem/errors.hpp"
#include "phsem/generator.hpp"
#include "phsem/scaling.hpp"
#include "phsem/trajectory.hpp"

namespace phsem {

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Complete-data sufficient statistics on the homogeneous timeline.
struct SufficientStatistics {
  CountVector starts;       // B_x
  CountMatrix transitions;  // N_xy, zero diagonal
  CountVector absorptions;  // N_x
  Vector occupation;        // R_x

  explicit SufficientStatistics(int n = 0);
  int size() const { return static_cast<int>(starts.size()); }
  std::int64_t paths() const { return starts.sum(); }
  SufficientStatistics& operator+=(const SufficientStatistics& other);
};

void add_path(SufficientStatistics& stats, const ContinuousPath& path);

// Throws InputError for paths on the inhomogeneous timeline.
SufficientStatistics accumulate_statistics(int n, std::span<const ContinuousPath> paths);

struct GeneratorEstimate {
  InitialDistribution pi;
  SubIntensityMatrix lambda;
};

// Closed-form complete-data MLE: pi_x = B_x / K, lambda_xy = N_xy / R_x,
// lambda_x = N_x / R_x, diagonal closing each full-generator row to zero.
// Throws StarvedStateError when some R_x == 0.
GeneratorEstimate mle_generator(const SufficientStatistics& stats, std::int64_t path_count);

// Same rates without the initial distribution (used when pi is fixed elsewhere).
SubIntensityMatrix mle_rates(const SufficientStatistics& stats);

// Complete-data log-likelihood of (pi, Lambda) given the statistics.
double complete_loglik(const SufficientStatistics& stats, const InitialDistribution& pi,
                       const SubIntensityMatrix& lambda);

// f(t) = h(t) pi exp(g_inv(t) Lambda) lambda
double iph_density(const InitialDistribution& pi, const SubIntensityMatrix& lambda,
                   const ScalingFamily& family, double t);
// F(t) = 1 - pi exp(g_inv(t) Lambda) 1
double iph_cdf(const InitialDistribution& pi, const SubIntensityMatrix& lambda,
               const ScalingFamily& family, double t);

// Log-likelihood of beta for fixed (pi, Lambda) given absorption times on
// the inhomogeneous timeline.
struct BetaObjective {
  FamilyKind family = FamilyKind::Identity;
  InitialDistribution pi;
  SubIntensityMatrix lambda;
  std::vector<double> absorption_times;
};

struct ObjectiveEvaluation {
  double value = 0.0;
  double gradient = 0.0;
  // First observation whose density is exactly zero; value is -inf then.
  std::optional<std::size_t> underflow_index;
};

ObjectiveEvaluation evaluate_objective(const BetaObjective& objective, double beta);
double beta_loglik(const BetaObjective& objective, double beta);
// Throws NumericalError when some density is zero.
double beta_gradient(const BetaObjective& objective, double beta);

struct GdStep {
  int step;
  double beta;
  double loglik;
  double gradient;
};

struct GdSettings {
  double eta = 1e-4;
  double e_ell = 0.01;
  double beta_min = 1e-5;
  int max_steps = 100'000;
};

struct GdResult {
  double beta = 0.0;
  int steps = 0;
  std::vector<GdStep> trace;
};

class GdNonConvergence : public EstimationError {
 public:
  GdNonConvergence(const std::string& what, std::vector<GdStep> trace)
      : EstimationError(what), trace_(std::move(trace)) {}
  const std::vector<GdStep>& trace() const { return trace_; }

 private:
  std::vector<GdStep> trace_;
};

// Clamped fixed-step ascent beta <- max(beta_min, beta + eta * dl/dbeta),
// stopping at the first update whose log-likelihood change is below e_ell.
GdResult gd_solve(const BetaObjective& objective, double beta0, const GdSettings& settings);

}  // namespace phsem
