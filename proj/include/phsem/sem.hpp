#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phsem/generator.hpp"
#include "phsem/likelihood.hpp"
#include "phsem/random.hpp"
#include "phsem/scaling.hpp"
#include "phsem/trajectory.hpp"

namespace phsem {

struct FitConfig {
  FamilyKind family = FamilyKind::Gompertz;
  double beta0 = 1.0;
  double eta = 1e-6;
  double e_ell = 0.01;
  double beta_min = 1e-5;
  int max_gd_steps = 100'000;
  int max_sem_iterations = 200;
  std::uint64_t seed = 1;
  bool homogeneous_mode = false;
  int homog_iterations = 300;
  int homog_tail_average = 20;
  std::size_t bridge_max_attempts = kDefaultBridgeAttempts;

  // Throws InputError on a broken invariant.
  void validate() const;
  GdSettings gd() const { return {eta, e_ell, beta_min, max_gd_steps}; }
};

enum class Termination { SingleUpdateConverged, MaxIterations, FixedIterations, Error };

std::string termination_name(Termination t);
Termination parse_termination(const std::string& name);

struct IterationRecord {
  int iteration = 0;  // 0 is the initialization
  Matrix lambda;
  std::optional<double> beta;
  int gd_updates = 0;
  std::size_t absorbed_paths = 0;
};

struct BetaTraceRow {
  int iteration;
  GdStep step;
};

struct FitResult {
  InitialDistribution pi_hat;
  SubIntensityMatrix lambda_hat;
  std::optional<double> beta_hat;
  FamilyKind family = FamilyKind::Gompertz;
  int iterations_used = 0;
  Termination termination = Termination::MaxIterations;
  std::string message;
  std::vector<IterationRecord> trace;
  std::vector<BetaTraceRow> beta_trace;
  std::vector<std::string> warnings;
};

// Fraction of paths starting in each transient state. Throws InputError if
// some path starts absorbed.
InitialDistribution empirical_pi(const PanelObservationSet& data);

// Reads each panel record as a continuously observed homogeneous path: state
// changes happen at the observation times, no time transformation.
ContinuousPath naive_path(const PanelPath& path, int n);

struct Initialization {
  InitialDistribution pi;
  SubIntensityMatrix lambda0;
  double beta = 0.0;
  int gd_updates = 0;
  std::vector<double> absorption_times;
  std::vector<GdStep> gd_trace;
  std::vector<std::string> warnings;
};

Initialization initialize(const PanelObservationSet& data, const FitConfig& cfg,
                          const RandomStream& rng);

struct SemState {
  InitialDistribution pi;
  SubIntensityMatrix lambda;
  double beta = 1.0;
};

// SE-step: for every path, maps its observation times to the homogeneous
// clock, bridges every inter-observation segment under `lambda`, and runs
// censored paths on to absorption. Path k of iteration i draws only from the
// substream (i, k, retry).
std::vector<ContinuousPath> complete_paths(const PanelObservationSet& data,
                                           const SubIntensityMatrix& lambda,
                                           const ScalingFamily& family, const FitConfig& cfg,
                                           const RandomStream& rng, int iteration);

struct IterationOutcome {
  SubIntensityMatrix lambda;
  double beta = 0.0;
  int gd_updates = 0;
  std::vector<GdStep> gd_trace;
};

IterationOutcome sem_iteration(const PanelObservationSet& data, const SemState& state,
                               const FitConfig& cfg, const RandomStream& rng, int iteration);

FitResult fit(const PanelObservationSet& data, const FitConfig& cfg, const RandomStream& rng);
FitResult fit(const PanelObservationSet& data, const FitConfig& cfg);

FitResult fit_homogeneous(const PanelObservationSet& data, const FitConfig& cfg,
                          const RandomStream& rng);

}  // namespace phsem
