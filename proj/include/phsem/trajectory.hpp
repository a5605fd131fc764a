#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "phsem/generator.hpp"
#include "phsem/random.hpp"
#include "phsem/scaling.hpp"

namespace phsem {

enum class Timeline { Homogeneous, Inhomogeneous };

// A fully observed trajectory (or a piece of one). States are 0-based and the
// absorbing state is n. times[i] is the epoch at which states[i] is entered;
// times[0] is the start of the path. `end` is the absorption epoch for
// absorbed paths and the censoring time otherwise.
struct ContinuousPath {
  std::vector<double> times;
  std::vector<int> states;
  double end = 0.0;
  bool absorbed = false;
  Timeline timeline = Timeline::Homogeneous;

  double start() const { return times.front(); }
  int initial_state() const { return states.front(); }
  int final_state() const { return states.back(); }
  std::size_t jumps() const { return states.size() - 1; }
  // State occupied at time t (cadlag lookup).
  int state_at(double t) const;
};

// One discretely observed trajectory. Observation times are strictly
// increasing and start at 0; the absorbing state may only be the last entry.
struct PanelPath {
  std::string id;
  std::vector<double> times;
  std::vector<int> states;

  bool absorbed(int n) const { return !states.empty() && states.back() == n; }
};

struct PanelObservationSet {
  int n = 0;  // number of transient states
  std::vector<PanelPath> paths;

  std::size_t size() const { return paths.size(); }
  std::size_t absorbed_count() const;
  // Throws InputError on any broken invariant.
  void validate() const;
};

// Jump-chain view of a sub-intensity matrix: holding rates and cumulative
// destination probabilities (destination n is absorption).
class JumpSampler {
 public:
  explicit JumpSampler(const SubIntensityMatrix& m);

  int n() const { return n_; }
  double holding_rate(int x) const { return holding_[x]; }
  int next_state(int x, RandomStream& rng) const;
  // Whether absorption can be reached from x through positive rates.
  bool absorption_reachable(int x) const { return reaches_absorption_[x]; }
  int draw_initial(const InitialDistribution& pi, RandomStream& rng) const;

  // Appends the evolution from state x over (start, stop] to path; stop may
  // be infinite. Returns true when absorbed.
  bool evolve(int x, double start, double stop, RandomStream& rng,
              ContinuousPath& path) const;

 private:
  int n_;
  std::vector<double> holding_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<bool> reaches_absorption_;
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kDefaultBridgeAttempts = 1'000'000;

ContinuousPath simulate_homogeneous(const SubIntensityMatrix& m, const InitialDistribution& pi,
                                    double horizon, RandomStream& rng);

// Simulates on the homogeneous clock up to g_inv(horizon) and maps every
// epoch through g.
ContinuousPath simulate_inhomogeneous(const SubIntensityMatrix& m, const InitialDistribution& pi,
                                      const ScalingFamily& family, double horizon,
                                      RandomStream& rng);

ContinuousPath to_inhomogeneous(const ContinuousPath& homogeneous, const ScalingFamily& family,
                                double horizon);

// Observes a path on an increasing grid starting at 0. The first grid time
// at/after absorption records state n and ends the record; grid times past a
// censoring time are dropped.
PanelPath discretize(const ContinuousPath& path, std::span<const double> grid, int n);

struct BridgeSample {
  ContinuousPath segment;
  std::size_t attempts = 0;
};

// Rejection sampler for the (s1, x, s2, y) Markov bridge: simulate from x for
// s2 - s1 and keep the first run that ends in y. For y == n the accepted run
// absorbs inside (s1, s2]. Throws BridgeBudgetError after max_attempts.
BridgeSample bridge_sample(const JumpSampler& sampler, double s1, int x, double s2, int y,
                           RandomStream& rng, std::size_t max_attempts = kDefaultBridgeAttempts);
BridgeSample bridge_sample(const SubIntensityMatrix& m, double s1, int x, double s2, int y,
                           RandomStream& rng, std::size_t max_attempts = kDefaultBridgeAttempts);

// Unconditioned run from last_state, started at `start`, until absorption.
// Throws StructuralError when absorption is unreachable.
ContinuousPath complete_censored(const JumpSampler& sampler, int last_state, RandomStream& rng,
                                 double start = 0.0);
ContinuousPath complete_censored(const SubIntensityMatrix& m, int last_state, RandomStream& rng,
                                 double start = 0.0);

}  // namespace phsem
