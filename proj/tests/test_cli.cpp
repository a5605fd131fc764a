#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "phsem/commands.hpp"
#include "phsem/gof.hpp"
#include "phsem/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = PHSEM_CONFIG_DIR;

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "phsem_test_cli";
  static bool fresh = [&] {
    fs::remove_all(dir);
    return fs::create_directories(dir);
  }();
  (void)fresh;
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + " \"" + std::string(PHSEM_CLI) + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return phsem::io::read_file(p); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("simulate, fit and gof are reproducible") {
  const fs::path dir = workdir() / "pipeline";
  const fs::path cfg = kConfigs / "weibull.ini";
  for (const char* tag : {"a", "b"}) {
    const fs::path d = dir / tag;
    REQUIRE(run("simulate --config " + q(cfg) + " --out " + q(d / "panel.csv") + " --K 150 --seed 7") == 0);
    REQUIRE(run("fit --panel " + q(d / "panel.csv") + " --config " + q(cfg) + " --out " + q(d / "fit") +
                " --seed 7 --dump-paths") == 0);
    REQUIRE(run("gof --panel " + q(d / "panel.csv") + " --fit " + q(d / "fit") + " --out " +
                q(d / "gof.csv") + " --ecdf " + q(d / "ecdf.csv") + " --seed 7") == 0);
  }
  for (const char* file : {"panel.csv", "panel.truth.txt", "panel.absorption.csv", "fit/report.txt",
                           "fit/lambda.csv", "fit/beta_trace.csv", "fit/paths.csv", "gof.csv",
                           "ecdf.csv"}) {
    INFO(file);
    REQUIRE(fs::exists(dir / "a" / file));
    CHECK(slurp(dir / "a" / file) == slurp(dir / "b" / file));
  }
  const auto report = phsem::io::read_report(dir / "a" / "fit");
  CHECK(report.beta_hat.has_value());
  CHECK(report.n == 2);

  // gof also accepts an absorption-time sample directly.
  CHECK(run("gof --samples " + q(dir / "a" / "panel.absorption.csv") + " --fit " + q(dir / "a" / "fit") +
            " --out " + q(dir / "a" / "gof2.csv")) == 0);
  CHECK(run("gof --fit " + q(dir / "a" / "fit") + " --out " + q(dir / "a" / "gof3.csv")) == 2);
}

TEST_CASE("different seeds give different panels") {
  const fs::path dir = workdir() / "seeds";
  const fs::path cfg = kConfigs / "weibull.ini";
  REQUIRE(run("simulate --config " + q(cfg) + " --out " + q(dir / "s1.csv") + " --K 20 --seed 1") == 0);
  REQUIRE(run("simulate --config " + q(cfg) + " --out " + q(dir / "s2.csv") + " --K 20 --seed 2") == 0);
  CHECK(slurp(dir / "s1.csv") != slurp(dir / "s2.csv"));

  // The environment seed applies when neither flag nor config sets one.
  std::ofstream(dir / "noseed.ini") << "[model]\nn = 2\nfamily = weibull\nbeta = 3\n"
                                       "pi = 0.5, 0.5\nlambda = -3, 0.1; 0.01, -0.1\n"
                                       "[study]\nK = 20\ndelta = 0.1\nhorizon = 5\n";
  REQUIRE(run("simulate --config " + q(dir / "noseed.ini") + " --out " + q(dir / "e2.csv"),
              "PHSEM_SEED=2") == 0);
  CHECK(slurp(dir / "e2.csv") == slurp(dir / "s2.csv"));
  REQUIRE(run("simulate --config " + q(dir / "noseed.ini") + " --out " + q(dir / "e1.csv"),
              "env -u PHSEM_SEED") == 0);
  CHECK(slurp(dir / "e1.csv") == slurp(dir / "s1.csv"));
}

TEST_CASE("input errors exit 2") {
  const fs::path dir = workdir() / "errors";
  fs::create_directories(dir);
  const fs::path cfg = kConfigs / "weibull.ini";
  std::ofstream(dir / "bad.csv") << "path_id,time,state\np1,0,1\np1,0,2\n";
  CHECK(run("fit --panel " + q(dir / "bad.csv") + " --config " + q(cfg) + " --out " + q(dir / "fit")) == 2);
  std::ofstream(dir / "range.csv") << "path_id,time,state\np1,0,1\np1,1,9\n";
  CHECK(run("fit --panel " + q(dir / "range.csv") + " --config " + q(cfg) + " --out " + q(dir / "fit")) == 2);
  std::ofstream(dir / "bad.ini") << "[model]\nn = 2\ncolour = blue\n";
  CHECK(run("simulate --config " + q(dir / "bad.ini") + " --out " + q(dir / "x.csv")) == 2);
  CHECK(run("study --name lognormal --config " + q(cfg) + " --out " + q(dir / "s")) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("estimation failure exits 3") {
  // A single SEM iteration with a tolerance the first beta step cannot meet.
  const fs::path dir = workdir() / "estimation";
  fs::create_directories(dir);
  std::ofstream(dir / "cap.ini") << "[model]\nn = 2\nfamily = weibull\n"
                                    "[estimation]\nbeta0 = 2\ne_ell = 1e-12\nmax_sem_iterations = 1\nseed = 1\n";
  std::ofstream(dir / "censored.csv") << "path_id,time,state\np1,0,1\np1,1,2\np2,0,2\np2,1,1\n";
  CHECK(run("fit --panel " + q(dir / "censored.csv") + " --config " + q(dir / "cap.ini") + " --out " +
            q(dir / "fit")) == 3);
  // The report is still written.
  CHECK(fs::exists(dir / "fit" / "report.txt"));
}

TEST_CASE("homogeneous flag drops beta") {
  const fs::path dir = workdir() / "homogeneous";
  const fs::path cfg = kConfigs / "weibull.ini";
  REQUIRE(run("simulate --config " + q(cfg) + " --out " + q(dir / "panel.csv") + " --K 50") == 0);
  REQUIRE(run("fit --panel " + q(dir / "panel.csv") + " --config " + q(cfg) + " --out " + q(dir / "fit") +
              " --homogeneous") == 0);
  const std::string report = slurp(dir / "fit" / "report.txt");
  CHECK(report.find("beta_hat") == std::string::npos);
  CHECK(report.find("family = homogeneous") != std::string::npos);
}

TEST_CASE("zero paths gives a header-only panel") {
  const fs::path dir = workdir() / "empty";
  REQUIRE(run("simulate --config " + q(kConfigs / "weibull.ini") + " --out " + q(dir / "panel.csv") +
              " --K 0") == 0);
  CHECK(slurp(dir / "panel.csv") == "path_id,time,state\n");
}

TEST_CASE("study smoke runs") {
  const fs::path dir = workdir() / "study";
  REQUIRE(run("study --name weibull --config " + q(kConfigs / "weibull.ini") + " --out " + q(dir / "w") +
              " --K 40 --seed 3") == 0);
  for (const char* file : {"estimates.csv", "censoring.csv", "parameters.csv", "density.csv"}) {
    INFO(file);
    CHECK(fs::exists(dir / "w" / file));
  }
  REQUIRE(run("study --name weibull --config " + q(kConfigs / "weibull.ini") + " --out " + q(dir / "w2") +
              " --K 40 --seed 3") == 0);
  CHECK(slurp(dir / "w" / "estimates.csv") == slurp(dir / "w2" / "estimates.csv"));
  CHECK(slurp(dir / "w" / "density.csv") == slurp(dir / "w2" / "density.csv"));

  REQUIRE(run("study --name comparison --config " + q(kConfigs / "gompertz.ini") + " --out " +
              q(dir / "c") + " --K 40 --seed 3") == 0);
  const std::string table = slurp(dir / "c" / "comparison.csv");
  CHECK(table.rfind("model,train_paths,n_reference,n_simulated,D,p_value,seed\n", 0) == 0);
  CHECK(table.find("inhomogeneous,") != std::string::npos);
  CHECK(table.find("\nhomogeneous,") != std::string::npos);
}

namespace {

// Rejections at the 5% level when a true-model sample is compared against
// another true-model sample through the gof path.
int null_rejections(std::uint64_t reps) {
  const auto cfg = phsem::io::read_config(kConfigs / "gompertz.ini");
  const phsem::ScalingFamily family = phsem::cli::true_family(cfg.model);
  int rejected = 0;
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    const auto reference = phsem::simulate_absorption_times(
        *cfg.model.pi, *cfg.model.lambda, family, 1000, phsem::RandomStream(1000 + rep));
    const auto gof = phsem::cli::compare_absorption(reference, *cfg.model.pi, *cfg.model.lambda,
                                                    family, 2000 + rep);
    if (gof.ks.p_value <= 0.05) ++rejected;
  }
  return rejected;
}

}  // namespace

TEST_CASE("null calibration: true vs true over 50 repetitions") {
  CHECK(50 - null_rejections(50) >= 45);
}

TEST_CASE("null calibration: rejection rate over 400 repetitions") {
  const int rejected = null_rejections(400);
  CHECK(rejected >= 8);
  CHECK(rejected <= 32);
}
