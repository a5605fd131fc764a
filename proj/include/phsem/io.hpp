#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "phsem/generator.hpp"
#include "phsem/sem.hpp"
#include "phsem/trajectory.hpp"

namespace phsem::io {

namespace fs = std::filesystem;

// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

// Writes via a temporary sibling and a rename so readers never see a
// partially written file.
void write_file_atomic(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

// Panel CSV: header `path_id,time,state`, 1-based states, n+1 absorbing.
// Paths keep their order of first appearance; records of a path must be in
// strictly increasing time order. Errors carry the 1-based line number.
PanelObservationSet parse_panel(const std::string& text, int n);
PanelObservationSet read_panel(const fs::path& path, int n);
std::string format_panel(const PanelObservationSet& data);
void write_panel(const PanelObservationSet& data, const fs::path& path);

// One value per line under a `time` header.
std::vector<double> parse_samples(const std::string& text);
std::vector<double> read_samples(const fs::path& path);
std::string format_samples(const std::vector<double>& values);

// n rows of n comma-separated entries.
std::string format_generator(const Matrix& m);
Matrix parse_generator(const std::string& text);

struct ModelSpec {
  int n = 0;
  FamilyKind family = FamilyKind::Gompertz;
  std::optional<double> beta;
  std::optional<InitialDistribution> pi;
  std::optional<SubIntensityMatrix> lambda;
};

struct GridSpec {
  std::optional<double> delta;
  std::optional<std::string> times_file;
  std::vector<double> times;  // loaded from times_file
};

struct StudySpec {
  std::size_t paths = 0;  // K
  double horizon = 0.0;   // T
  GridSpec grid;
  std::vector<double> horizons;
};

struct RunConfig {
  ModelSpec model;
  FitConfig fit;
  std::optional<StudySpec> study;
  bool seed_given = false;
};

// INI-style config with [model], [estimation] and [study] sections; see
// configs/*.ini. Throws InputError on malformed or inconsistent values.
RunConfig parse_config(const std::string& text, const fs::path& base_dir = {});
RunConfig read_config(const fs::path& path);

// Default seed: $PHSEM_SEED when set, else 1.
std::uint64_t default_seed();

std::vector<double> observation_grid(const GridSpec& grid, double horizon);

struct FitReport {
  FamilyKind family = FamilyKind::Gompertz;
  int n = 0;
  std::uint64_t seed = 0;
  Termination termination = Termination::MaxIterations;
  int iterations = 0;
  std::optional<double> beta_hat;
  InitialDistribution pi;
  SubIntensityMatrix lambda;
};

std::string format_report(const FitResult& result, const FitConfig& cfg);
FitReport parse_report(const std::string& text);
// `path` may be the report directory or the report file itself.
FitReport read_report(const fs::path& path);

}  // namespace phsem::io
