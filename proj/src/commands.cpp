#include "phsem/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "phsem/errors.hpp"
#include "phsem/likelihood.hpp"

namespace phsem::cli {

using io::format_double;

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const EstimationError& e) {
    err << "estimation failed: " << e.what() << '\n';
    return kEstimationError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kNumericalError;
  }
}

ScalingFamily true_family(const io::ModelSpec& model) {
  if (model.family == FamilyKind::Identity) return ScalingFamily::identity();
  if (!model.beta) throw InputError("config: [model] beta is required for the true model");
  return ScalingFamily(model.family, *model.beta);
}

ScalingFamily fitted_family(const FitResult& result) {
  if (!result.beta_hat) return ScalingFamily::identity();
  return ScalingFamily(result.family, *result.beta_hat);
}

namespace {

void require_truth(const io::ModelSpec& model) {
  if (!model.pi) throw InputError("config: [model] pi is required to simulate");
  if (!model.lambda) throw InputError("config: [model] lambda is required to simulate");
  true_family(model);
}

const io::StudySpec& require_study(const io::RunConfig& cfg) {
  if (!cfg.study) throw InputError("config: [study] section is required");
  return *cfg.study;
}

std::vector<double> study_horizons(const io::StudySpec& study) {
  std::vector<double> out = study.horizons.empty() ? std::vector<double>{study.horizon}
                                                   : study.horizons;
  for (double t : out) {
    if (!(t > 0.0)) throw InputError("config: [study] horizons must be > 0");
  }
  return out;
}

}  // namespace

std::vector<ContinuousPath> simulate_paths(const io::ModelSpec& model, std::size_t paths,
                                           double horizon, std::uint64_t seed) {
  require_truth(model);
  const ScalingFamily family = true_family(model);
  const RandomStream root(seed);
  std::vector<ContinuousPath> out;
  out.reserve(paths);
  for (std::size_t k = 0; k < paths; ++k) {
    RandomStream rng = root.substream({kSimulateTag, k});
    out.push_back(simulate_inhomogeneous(*model.lambda, *model.pi, family, horizon, rng));
  }
  return out;
}

ObservedStudyData observe(const std::vector<ContinuousPath>& paths, const std::vector<double>& grid,
                          int n) {
  ObservedStudyData out;
  out.panel.n = n;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    PanelPath p = discretize(paths[k], grid, n);
    p.id = fmt::format("p{}", k + 1);
    if (p.absorbed(n)) out.absorption_times.push_back(paths[k].end);
    out.panel.paths.push_back(std::move(p));
  }
  return out;
}

std::vector<double> observed_absorption_times(const PanelObservationSet& data) {
  std::vector<double> out;
  for (const auto& p : data.paths) {
    if (p.absorbed(data.n)) out.push_back(p.times.back());
  }
  return out;
}

GofOutcome compare_absorption(const std::vector<double>& reference, const InitialDistribution& pi,
                              const SubIntensityMatrix& lambda, const ScalingFamily& family,
                              std::uint64_t seed) {
  if (reference.empty()) throw InputError("no absorbed paths to compare against");
  GofOutcome out;
  out.reference = reference;
  out.simulated = simulate_absorption_times(pi, lambda, family, reference.size(),
                                            RandomStream(seed).substream({kGofTag}));
  out.ks = ks_two_sample(SampleSet(out.reference), SampleSet(out.simulated));
  return out;
}

std::string format_gof(const GofOutcome& gof) {
  return fmt::format("n_reference,n_simulated,D,p_value\n{},{},{},{}\n", gof.ks.size_a,
                     gof.ks.size_b, format_double(gof.ks.statistic), format_double(gof.ks.p_value));
}

std::string format_ecdf(const GofOutcome& gof) {
  std::string out = "t,reference,simulated\n";
  for (const auto& row : ecdf_table(SampleSet(gof.reference), SampleSet(gof.simulated))) {
    out += fmt::format("{},{},{}\n", format_double(row.t), format_double(row.a), format_double(row.b));
  }
  return out;
}

HorizonStudy run_horizon_study(const io::RunConfig& cfg, std::uint64_t seed) {
  const auto& study = require_study(cfg);
  const auto horizons = study_horizons(study);
  const double longest = *std::max_element(horizons.begin(), horizons.end());
  const auto paths = simulate_paths(cfg.model, study.paths, longest, seed);

  FitConfig fit_cfg = cfg.fit;
  fit_cfg.seed = seed;

  HorizonStudy out;
  out.seed = seed;
  out.truth = cfg.model;
  for (double horizon : horizons) {
    const auto grid = io::observation_grid(study.grid, horizon);
    ObservedStudyData data = observe(paths, grid, cfg.model.n);
    HorizonResult row;
    row.horizon = horizon;
    row.absorbed = data.panel.absorbed_count();
    row.fit = fit(data.panel, fit_cfg);
    if (row.fit.termination == Termination::Error) {
      throw EstimationError(fmt::format("fit at T = {} failed: {}", format_double(horizon),
                                        row.fit.message));
    }
    row.gof = compare_absorption(data.absorption_times, row.fit.pi_hat, row.fit.lambda_hat,
                                 fitted_family(row.fit), seed);
    out.rows.push_back(std::move(row));
  }
  return out;
}

ComparisonStudy run_comparison_study(const io::RunConfig& cfg, std::uint64_t seed) {
  const auto& study = require_study(cfg);
  const auto paths = simulate_paths(cfg.model, study.paths, study.horizon, seed);
  const auto grid = io::observation_grid(study.grid, study.horizon);
  const ObservedStudyData all = observe(paths, grid, cfg.model.n);

  PanelObservationSet train;
  train.n = cfg.model.n;
  std::vector<double> held_out;
  std::size_t test_paths = 0;
  std::size_t next_absorbed = 0;
  for (std::size_t k = 0; k < all.panel.paths.size(); ++k) {
    const auto& p = all.panel.paths[k];
    const bool absorbed = p.absorbed(cfg.model.n);
    if (k % 2 == 0) {
      train.paths.push_back(p);
    } else {
      ++test_paths;
      if (absorbed) held_out.push_back(all.absorption_times[next_absorbed]);
    }
    if (absorbed) ++next_absorbed;
  }

  FitConfig inhomogeneous_cfg = cfg.fit;
  inhomogeneous_cfg.seed = seed;
  inhomogeneous_cfg.homogeneous_mode = false;
  FitConfig homogeneous_cfg = inhomogeneous_cfg;
  homogeneous_cfg.homogeneous_mode = true;

  ComparisonStudy out;
  out.seed = seed;
  out.train_paths = train.size();
  out.test_paths = test_paths;
  out.inhomogeneous = fit(train, inhomogeneous_cfg);
  out.homogeneous = fit(train, homogeneous_cfg);
  for (const FitResult* r : {&out.inhomogeneous, &out.homogeneous}) {
    if (r->termination == Termination::Error) {
      throw EstimationError("comparison fit failed: " + r->message);
    }
  }
  out.inhomogeneous_gof = compare_absorption(held_out, out.inhomogeneous.pi_hat,
                                             out.inhomogeneous.lambda_hat,
                                             fitted_family(out.inhomogeneous), seed);
  out.homogeneous_gof = compare_absorption(held_out, out.homogeneous.pi_hat,
                                           out.homogeneous.lambda_hat,
                                           fitted_family(out.homogeneous), seed);
  return out;
}

namespace {

std::string lambda_header(int n, const char* prefix) {
  std::string out;
  for (int x = 1; x <= n; ++x) {
    for (int y = 1; y <= n; ++y) out += fmt::format(",{}{}{}", prefix, x, y);
  }
  return out;
}

std::string lambda_cells(const Matrix& m) {
  std::string out;
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    for (Eigen::Index y = 0; y < m.cols(); ++y) out += "," + format_double(m(x, y));
  }
  return out;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string format_estimates_table(const HorizonStudy& study) {
  const int n = study.truth.n;
  std::string out = "T,beta_hat" + lambda_header(n, "lambda_") + ",seed\n";
  for (const auto& row : study.rows) {
    out += format_double(row.horizon) + "," + optional_cell(row.fit.beta_hat) +
           lambda_cells(row.fit.lambda_hat.entries()) + fmt::format(",{}\n", study.seed);
  }
  return out;
}

std::string format_censoring_table(const HorizonStudy& study) {
  std::string out = "T,absorbed_paths,iteration,p_value,seed\n";
  for (const auto& row : study.rows) {
    out += fmt::format("{},{},{},{},{}\n", format_double(row.horizon), row.absorbed,
                       row.fit.iterations_used, format_double(row.gof.ks.p_value), study.seed);
  }
  return out;
}

std::string format_parameter_table(const HorizonStudy& study) {
  if (study.rows.empty()) return "parameter,true_value,estimator,seed\n";
  const auto& fit = study.rows.front().fit;
  std::string out = "parameter,true_value,estimator,seed\n";
  out += fmt::format("beta,{},{},{}\n", optional_cell(study.truth.beta),
                     optional_cell(fit.beta_hat), study.seed);
  const int n = study.truth.n;
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      out += fmt::format("lambda_{}{},{},{},{}\n", x + 1, y + 1,
                         study.truth.lambda ? format_double((*study.truth.lambda)(x, y)) : "",
                         format_double(fit.lambda_hat(x, y)), study.seed);
    }
  }
  return out;
}

std::string format_comparison_table(const ComparisonStudy& study) {
  std::string out = "model,train_paths,n_reference,n_simulated,D,p_value,seed\n";
  auto row = [&](const char* name, const GofOutcome& g) {
    out += fmt::format("{},{},{},{},{},{},{}\n", name, study.train_paths, g.ks.size_a, g.ks.size_b,
                       format_double(g.ks.statistic), format_double(g.ks.p_value), study.seed);
  };
  row("inhomogeneous", study.inhomogeneous_gof);
  row("homogeneous", study.homogeneous_gof);
  return out;
}

std::string format_trace(const FitResult& result) {
  const int n = result.lambda_hat.size();
  std::string out = "iteration,beta,gd_updates,absorbed_paths" + lambda_header(n, "lambda_") + "\n";
  for (const auto& rec : result.trace) {
    out += fmt::format("{},{},{},{}", rec.iteration, optional_cell(rec.beta), rec.gd_updates,
                       rec.absorbed_paths) +
           lambda_cells(rec.lambda) + "\n";
  }
  return out;
}

std::string format_density(const io::ModelSpec& truth, const FitResult& fit, double upper,
                           int points) {
  require_truth(truth);
  const ScalingFamily true_scaling = true_family(truth);
  const ScalingFamily fit_scaling = fitted_family(fit);
  std::string out = "t,true_density,fitted_density\n";
  for (int i = 1; i <= points; ++i) {
    const double t = upper * i / points;
    out += fmt::format("{},{},{}\n", format_double(t),
                       format_double(iph_density(*truth.pi, *truth.lambda, true_scaling, t)),
                       format_double(iph_density(fit.pi_hat, fit.lambda_hat, fit_scaling, t)));
  }
  return out;
}

std::string format_completed_paths(const PanelObservationSet& data,
                                   const std::vector<ContinuousPath>& homogeneous,
                                   const ScalingFamily& family) {
  std::string out = "path_id,epoch,state,timeline\n";
  for (std::size_t k = 0; k < homogeneous.size(); ++k) {
    const auto& path = homogeneous[k];
    const ContinuousPath mapped = to_inhomogeneous(path, family, kUnbounded);
    for (const auto* p : {&path, &mapped}) {
      const char* tag = p->timeline == Timeline::Homogeneous ? "homogeneous" : "inhomogeneous";
      for (std::size_t j = 0; j < p->times.size(); ++j) {
        out += fmt::format("{},{},{},{}\n", data.paths[k].id, format_double(p->times[j]),
                           p->states[j] + 1, tag);
      }
    }
  }
  return out;
}

void write_fit_outputs(const FitResult& result, const FitConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_file_atomic(dir / "report.txt", io::format_report(result, cfg));
  io::write_file_atomic(dir / "lambda.csv", io::format_generator(result.lambda_hat.entries()));
  if (!result.beta_trace.empty()) {
    std::string out = "iteration,step,beta,loglik,gradient\n";
    for (const auto& row : result.beta_trace) {
      out += fmt::format("{},{},{},{},{}\n", row.iteration, row.step.step,
                         format_double(row.step.beta), format_double(row.step.loglik),
                         format_double(row.step.gradient));
    }
    io::write_file_atomic(dir / "beta_trace.csv", out);
  }
}

namespace {

std::uint64_t resolve_seed(const io::RunConfig& cfg, const std::optional<std::uint64_t>& flag) {
  return flag ? *flag : cfg.fit.seed;
}

int status_of(const FitResult& result) {
  switch (result.termination) {
    case Termination::SingleUpdateConverged:
    case Termination::FixedIterations:
      return kOk;
    case Termination::MaxIterations:
    case Termination::Error:
      return kEstimationError;
  }
  return kEstimationError;
}

std::string truth_report(const io::RunConfig& cfg, std::uint64_t seed, std::size_t paths,
                         double horizon) {
  const auto& model = cfg.model;
  std::string out = "# phsem simulation truth\n";
  out += "family = " + family_name(model.family) + "\n";
  out += fmt::format("n = {}\n", model.n);
  if (model.beta && model.family != FamilyKind::Identity) {
    out += "beta = " + format_double(*model.beta) + "\n";
  }
  out += fmt::format("seed = {}\nK = {}\n", seed, paths);
  out += "horizon = " + format_double(horizon) + "\n";
  out += "\n[pi]\nstate,probability\n";
  for (int x = 0; x < model.n; ++x) {
    out += fmt::format("{},{}\n", x + 1, format_double((*model.pi)[x]));
  }
  out += "\n[lambda]\n" + io::format_generator(model.lambda->entries());
  return out;
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path out = file.parent_path() / file.stem();
  out += suffix;
  return out;
}

}  // namespace

int cmd_simulate(const SimulateOptions& opts, std::ostream& log) {
  io::RunConfig cfg = io::read_config(opts.config);
  io::StudySpec study = require_study(cfg);
  if (opts.paths) study.paths = *opts.paths;
  require_truth(cfg.model);
  const std::uint64_t seed = resolve_seed(cfg, opts.seed);
  if (!(study.horizon > 0.0)) throw InputError("config: [study] horizon must be > 0");
  const auto grid = io::observation_grid(study.grid, study.horizon);

  const auto paths = simulate_paths(cfg.model, study.paths, study.horizon, seed);
  const ObservedStudyData data = observe(paths, grid, cfg.model.n);
  if (study.paths == 0) log << "warning: K = 0, writing a header-only panel\n";

  io::write_panel(data.panel, opts.out);
  io::write_file_atomic(sibling(opts.out, ".truth.txt"),
                        truth_report(cfg, seed, study.paths, study.horizon));
  io::write_file_atomic(sibling(opts.out, ".absorption.csv"),
                        io::format_samples(data.absorption_times));
  log << fmt::format("simulated {} paths ({} absorbed) to {}\n", data.panel.size(),
                     data.panel.absorbed_count(), opts.out.string());
  return kOk;
}

int cmd_fit(const FitOptions& opts, std::ostream& log) {
  io::RunConfig cfg = io::read_config(opts.config);
  if (opts.seed) cfg.fit.seed = *opts.seed;
  if (opts.homogeneous) cfg.fit.homogeneous_mode = true;
  const PanelObservationSet data = io::read_panel(opts.panel, cfg.model.n);
  const FitResult result = fit(data, cfg.fit);
  write_fit_outputs(result, cfg.fit, opts.out);
  if (opts.dump_paths && result.termination != Termination::Error) {
    const ScalingFamily family = fitted_family(result);
    const auto completed = complete_paths(data, result.lambda_hat, family, cfg.fit,
                                          RandomStream(cfg.fit.seed), result.iterations_used + 1);
    io::write_file_atomic(opts.out / "paths.csv", format_completed_paths(data, completed, family));
  }
  for (const auto& w : result.warnings) log << "warning: " << w << '\n';
  log << fmt::format("fit finished: {} after {} iterations\n", termination_name(result.termination),
                     result.iterations_used);
  if (!result.message.empty()) log << result.message << '\n';
  return status_of(result);
}

int cmd_gof(const GofOptions& opts, std::ostream& log) {
  if (opts.panel.has_value() == opts.samples.has_value()) {
    throw InputError("gof needs exactly one of --panel or --samples");
  }
  const io::FitReport report = io::read_report(opts.fit);
  std::vector<double> reference;
  if (opts.panel) {
    reference = observed_absorption_times(io::read_panel(*opts.panel, report.n));
  } else {
    reference = io::read_samples(*opts.samples);
  }
  if (reference.empty()) throw InputError("input has no absorbed paths");
  const ScalingFamily family = report.beta_hat ? ScalingFamily(report.family, *report.beta_hat)
                                               : ScalingFamily::identity();
  const std::uint64_t seed = opts.seed ? *opts.seed : io::default_seed();
  const GofOutcome gof = compare_absorption(reference, report.pi, report.lambda, family, seed);
  io::write_file_atomic(opts.out, format_gof(gof));
  if (opts.ecdf) io::write_file_atomic(*opts.ecdf, format_ecdf(gof));
  log << fmt::format("KS D = {:.4f}, p = {:.4g} ({} vs {})\n", gof.ks.statistic, gof.ks.p_value,
                     gof.ks.size_a, gof.ks.size_b);
  return kOk;
}

int cmd_study(const StudyOptions& opts, std::ostream& log) {
  io::RunConfig cfg = io::read_config(opts.config);
  if (!cfg.study) throw InputError("config: [study] section is required");
  if (opts.paths) cfg.study->paths = *opts.paths;
  const std::uint64_t seed = resolve_seed(cfg, opts.seed);
  fs::create_directories(opts.out);

  if (opts.name == "gompertz" || opts.name == "weibull") {
    const HorizonStudy study = run_horizon_study(cfg, seed);
    io::write_file_atomic(opts.out / "estimates.csv", format_estimates_table(study));
    io::write_file_atomic(opts.out / "censoring.csv", format_censoring_table(study));
    if (opts.name == "weibull") {
      io::write_file_atomic(opts.out / "parameters.csv", format_parameter_table(study));
      const double upper = study.rows.front().horizon;
      io::write_file_atomic(opts.out / "density.csv",
                            format_density(cfg.model, study.rows.front().fit, upper, 200));
    }
    for (const auto& row : study.rows) {
      const std::string tag = fmt::format("T{}", format_double(row.horizon));
      io::write_file_atomic(opts.out / ("ecdf_" + tag + ".csv"), format_ecdf(row.gof));
      io::write_file_atomic(opts.out / ("trace_" + tag + ".csv"), format_trace(row.fit));
      log << fmt::format("T = {}: absorbed {}, {} after {} iterations, beta_hat = {}, p = {:.4g}\n",
                         format_double(row.horizon), row.absorbed,
                         termination_name(row.fit.termination), row.fit.iterations_used,
                         row.fit.beta_hat ? format_double(*row.fit.beta_hat) : "-",
                         row.gof.ks.p_value);
    }
    return kOk;
  }
  if (opts.name == "comparison") {
    const ComparisonStudy study = run_comparison_study(cfg, seed);
    io::write_file_atomic(opts.out / "comparison.csv", format_comparison_table(study));
    io::write_file_atomic(opts.out / "ecdf_inhomogeneous.csv", format_ecdf(study.inhomogeneous_gof));
    io::write_file_atomic(opts.out / "ecdf_homogeneous.csv", format_ecdf(study.homogeneous_gof));
    io::write_file_atomic(opts.out / "trace_inhomogeneous.csv", format_trace(study.inhomogeneous));
    io::write_file_atomic(opts.out / "trace_homogeneous.csv", format_trace(study.homogeneous));
    log << fmt::format("inhomogeneous p = {:.4g}, homogeneous p = {:.4g}\n",
                       study.inhomogeneous_gof.ks.p_value, study.homogeneous_gof.ks.p_value);
    return kOk;
  }
  throw InputError("unknown study '" + opts.name + "' (expected gompertz, weibull or comparison)");
}

}  // namespace phsem::cli
