#include <CLI11.hpp>

#include <iostream>

#include "phsem/commands.hpp"

namespace {

template <class T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target,
                   const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace phsem::cli;
  CLI::App app{"Fit time-scaled inhomogeneous phase-type models to panel data"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a panel from the [model] and [study] config");
  simulate->add_option("--config", sim.config)->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Panel CSV to write")->required();
  optional_flag(simulate, "--seed", sim.seed, "Overrides the configured seed");
  optional_flag(simulate, "--K", sim.paths, "Overrides the number of paths");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate (pi, Lambda, beta) from a panel");
  fit_cmd->add_option("--panel", fit.panel)->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--config", fit.config)->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit.out, "Report directory")->required();
  optional_flag(fit_cmd, "--seed", fit.seed, "Overrides the configured seed");
  fit_cmd->add_flag("--homogeneous", fit.homogeneous, "Fit a homogeneous model");
  fit_cmd->add_flag("--dump-paths", fit.dump_paths,
                    "Write one reconstruction of every path under the final estimates");

  GofOptions gof;
  auto* gof_cmd = app.add_subcommand("gof", "Two-sample KS test of absorption times against a fit");
  optional_flag(gof_cmd, "--panel", gof.panel, "Panel CSV; absorbed paths give the reference");
  optional_flag(gof_cmd, "--samples", gof.samples, "Reference absorption times (`time` column)");
  gof_cmd->add_option("--fit", gof.fit, "Fit report directory or file")->required();
  gof_cmd->add_option("--out", gof.out)->required();
  optional_flag(gof_cmd, "--ecdf", gof.ecdf, "Also write both ECDFs to this CSV");
  optional_flag(gof_cmd, "--seed", gof.seed, "Seed for the simulated sample");

  StudyOptions study;
  auto* study_cmd = app.add_subcommand("study", "Run a simulation study end to end");
  study_cmd->add_option("--name", study.name)
      ->required()
      ->check(CLI::IsMember({"gompertz", "weibull", "comparison"}));
  study_cmd->add_option("--config", study.config)->required()->check(CLI::ExistingFile);
  study_cmd->add_option("--out", study.out, "Output directory")->required();
  optional_flag(study_cmd, "--seed", study.seed, "Overrides the configured seed");
  optional_flag(study_cmd, "--K", study.paths, "Overrides the number of paths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, std::cerr);
    if (fit_cmd->parsed()) return cmd_fit(fit, std::cerr);
    if (gof_cmd->parsed()) return cmd_gof(gof, std::cerr);
    return cmd_study(study, std::cerr);
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
}
