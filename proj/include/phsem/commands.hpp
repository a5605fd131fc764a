#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phsem/gof.hpp"
#include "phsem/io.hpp"
#include "phsem/sem.hpp"

namespace phsem::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInputError = 2, kEstimationError = 3, kNumericalError = 4 };

// Maps the exception currently being handled to an exit status, printing its
// message to `err`. Call only from inside a catch block.
int exit_code_for_current_exception(std::ostream& err);

// Stream tags under the run seed.
inline constexpr std::uint64_t kSimulateTag = 1;
inline constexpr std::uint64_t kGofTag = 3;

ScalingFamily true_family(const io::ModelSpec& model);
ScalingFamily fitted_family(const FitResult& result);

// K inhomogeneous paths up to `horizon`, path k drawing only from
// substream (kSimulateTag, k). Paths for a shorter horizon are prefixes of
// those for a longer one.
std::vector<ContinuousPath> simulate_paths(const io::ModelSpec& model, std::size_t paths,
                                           double horizon, std::uint64_t seed);

struct ObservedStudyData {
  PanelObservationSet panel;
  // True absorption epochs of the paths recorded as absorbed in `panel`.
  std::vector<double> absorption_times;
};

ObservedStudyData observe(const std::vector<ContinuousPath>& paths, const std::vector<double>& grid,
                          int n);

// Absorption epochs as recorded in the panel (the first observation in the
// absorbing state).
std::vector<double> observed_absorption_times(const PanelObservationSet& data);

struct GofOutcome {
  KsResult ks;
  std::vector<double> reference;
  std::vector<double> simulated;
};

// Simulates as many absorption times as `reference` holds under the given
// model and runs the two-sample KS test against `reference`.
GofOutcome compare_absorption(const std::vector<double>& reference, const InitialDistribution& pi,
                              const SubIntensityMatrix& lambda, const ScalingFamily& family,
                              std::uint64_t seed);

std::string format_gof(const GofOutcome& gof);
std::string format_ecdf(const GofOutcome& gof);

struct HorizonResult {
  double horizon = 0.0;
  std::size_t absorbed = 0;
  FitResult fit;
  GofOutcome gof;
};

struct HorizonStudy {
  std::uint64_t seed = 0;
  io::ModelSpec truth;
  std::vector<HorizonResult> rows;
};

// simulate -> fit -> gof at every configured horizon (study.horizons, or just
// study.horizon).
HorizonStudy run_horizon_study(const io::RunConfig& cfg, std::uint64_t seed);

struct ComparisonStudy {
  std::uint64_t seed = 0;
  std::size_t train_paths = 0;
  std::size_t test_paths = 0;
  FitResult inhomogeneous;
  FitResult homogeneous;
  GofOutcome inhomogeneous_gof;
  GofOutcome homogeneous_gof;
};

// Fits the scaled model and a homogeneous one on the even-indexed paths and
// tests both against the true absorption times of the odd-indexed ones.
ComparisonStudy run_comparison_study(const io::RunConfig& cfg, std::uint64_t seed);

std::string format_estimates_table(const HorizonStudy& study);
std::string format_censoring_table(const HorizonStudy& study);
std::string format_parameter_table(const HorizonStudy& study);
std::string format_comparison_table(const ComparisonStudy& study);
std::string format_trace(const FitResult& result);
// True and fitted densities on an even grid over [0, upper].
std::string format_density(const io::ModelSpec& truth, const FitResult& fit, double upper,
                           int points);

std::string format_completed_paths(const PanelObservationSet& data,
                                   const std::vector<ContinuousPath>& homogeneous,
                                   const ScalingFamily& family);

void write_fit_outputs(const FitResult& result, const FitConfig& cfg, const fs::path& dir);

struct SimulateOptions {
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
};
int cmd_simulate(const SimulateOptions& opts, std::ostream& log);

struct FitOptions {
  fs::path panel;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  bool homogeneous = false;
  // Also writes paths.csv: one completion of every path under the final
  // estimates, on both timelines.
  bool dump_paths = false;
};
int cmd_fit(const FitOptions& opts, std::ostream& log);

struct GofOptions {
  std::optional<fs::path> panel;
  std::optional<fs::path> samples;
  fs::path fit;
  fs::path out;
  std::optional<fs::path> ecdf;
  std::optional<std::uint64_t> seed;
};
int cmd_gof(const GofOptions& opts, std::ostream& log);

struct StudyOptions {
  std::string name;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
};
int cmd_study(const StudyOptions& opts, std::ostream& log);

}  // namespace phsem::cli
