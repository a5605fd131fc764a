#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "phsem/errors.hpp"
#include "phsem/likelihood.hpp"

using namespace phsem;

namespace {

SubIntensityMatrix unit_rate() {
  Matrix m(1, 1);
  m << -1;
  return SubIntensityMatrix(m);
}

InitialDistribution one_state() { return InitialDistribution(Vector::Ones(1)); }

SubIntensityMatrix weibull_lambda() {
  Matrix m(2, 2);
  m << -3, 0.1, 0.01, -0.1;
  return SubIntensityMatrix(m);
}

InitialDistribution halves() {
  Vector p(2);
  p << 0.5, 0.5;
  return InitialDistribution(p);
}

SubIntensityMatrix gompertz_lambda() {
  Matrix m(3, 3);
  m << -0.1357, 0.1214, 0, 0.0130, -0.0421, 0.0288, 0.1415, 0.0184, -0.1620;
  return SubIntensityMatrix(m);
}

InitialDistribution gompertz_pi() {
  Vector p(3);
  p << 0.0451, 0.1303, 0.8246;
  return InitialDistribution(p);
}

ContinuousPath two_step_path() {
  ContinuousPath p;
  p.times = {0.0, 0.4, 1.0};
  p.states = {0, 1, 2};
  p.end = 1.0;
  p.absorbed = true;
  return p;
}

std::vector<double> gompertz_sample(std::size_t count, std::uint64_t seed, double beta = 0.1019) {
  const RandomStream root(seed);
  const ScalingFamily f(FamilyKind::Gompertz, beta);
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) {
    RandomStream rng = root.substream({k});
    out.push_back(simulate_inhomogeneous(gompertz_lambda(), gompertz_pi(), f, kUnbounded, rng).end);
  }
  return out;
}

}  // namespace

TEST_CASE("statistics bookkeeping") {
  const std::vector<ContinuousPath> paths = {two_step_path()};
  const auto s = accumulate_statistics(2, paths);
  CHECK(s.starts(0) == 1);
  CHECK(s.starts(1) == 0);
  CHECK(s.transitions(0, 1) == 1);
  CHECK(s.absorptions(0) == 0);
  CHECK(s.absorptions(1) == 1);
  CHECK(s.occupation(0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.occupation(1) == doctest::Approx(0.6).epsilon(1e-15));

  const auto empty = accumulate_statistics(2, std::vector<ContinuousPath>{});
  CHECK(empty.paths() == 0);
  CHECK(empty.occupation.sum() == 0.0);

  ContinuousPath censored;
  censored.times = {0.0, 2.0};
  censored.states = {1, 0};
  censored.end = 5.0;
  const std::vector<ContinuousPath> both = {two_step_path(), censored};
  auto merged = accumulate_statistics(2, std::vector<ContinuousPath>{two_step_path()});
  merged += accumulate_statistics(2, std::vector<ContinuousPath>{censored});
  const auto joint = accumulate_statistics(2, both);
  CHECK(merged.starts == joint.starts);
  CHECK(merged.transitions == joint.transitions);
  CHECK(merged.absorptions == joint.absorptions);
  CHECK(merged.occupation == joint.occupation);
  CHECK(joint.occupation.sum() == doctest::Approx(6.0).epsilon(1e-15));

  ContinuousPath wrong = two_step_path();
  wrong.timeline = Timeline::Inhomogeneous;
  CHECK_THROWS_AS(accumulate_statistics(2, std::vector<ContinuousPath>{wrong}), InputError);
}

TEST_CASE("closed-form MLE") {
  SufficientStatistics s(2);
  s.transitions(0, 1) = 3;
  s.occupation(0) = 6.0;
  s.occupation(1) = 1.0;
  s.starts << 2, 2;
  const auto est = mle_generator(s, 4);
  CHECK(est.lambda(0, 1) == 0.5);
  CHECK(est.lambda(0, 0) == -0.5);
  CHECK(est.pi[0] == 0.5);
  CHECK(est.pi[1] == 0.5);
  CHECK(validate_generator(est.lambda).ok());

  SufficientStatistics starved(3);
  starved.occupation << 1.0, 0.0, 2.0;
  try {
    mle_rates(starved);
    FAIL("expected a starved-state error");
  } catch (const StarvedStateError& e) {
    CHECK(e.state() == 2);
  }
}

TEST_CASE("MLE from fully observed homogeneous paths is consistent") {
  const RandomStream root(21);
  SufficientStatistics s(2);
  for (std::uint64_t k = 0; k < 100000; ++k) {
    RandomStream rng = root.substream({k});
    add_path(s, simulate_homogeneous(weibull_lambda(), halves(), kUnbounded, rng));
  }
  const auto est = mle_generator(s, 100000);
  const Vector exits = exit_rates(weibull_lambda());
  const Vector est_exits = exit_rates(est.lambda);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      if (x == y) continue;
      const double rate = weibull_lambda()(x, y);
      CHECK(std::abs(est.lambda(x, y) - rate) <= 3.0 * std::sqrt(rate / s.occupation(x)));
    }
    CHECK(std::abs(est_exits(x) - exits(x)) <= 3.0 * std::sqrt(exits(x) / s.occupation(x)));
  }
}

TEST_CASE("MLE is a local maximum of the complete-data likelihood") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> counts(1, 30);
  std::uniform_real_distribution<double> times(0.5, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    SufficientStatistics s(n);
    for (int x = 0; x < n; ++x) {
      s.starts(x) = counts(rng);
      s.absorptions(x) = counts(rng);
      s.occupation(x) = times(rng);
      for (int y = 0; y < n; ++y) {
        if (y != x) s.transitions(x, y) = counts(rng);
      }
    }
    const auto est = mle_generator(s, s.starts.sum());
    const double best = complete_loglik(s, est.pi, est.lambda);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y <= n; ++y) {
        if (y == x) continue;
        for (double factor : {0.9, 1.1}) {
          Matrix m = est.lambda.entries();
          if (y == n) {
            // Exit rate: only the diagonal moves.
            const double exit = -m.row(x).sum();
            m(x, x) -= exit * (factor - 1.0);
          } else {
            const double old = m(x, y);
            m(x, y) = old * factor;
            m(x, x) -= old * (factor - 1.0);
          }
          CHECK(complete_loglik(s, est.pi, SubIntensityMatrix(m)) <= best);
        }
      }
    }
  }
}

TEST_CASE("scalar densities and distribution functions") {
  const ScalingFamily identity = ScalingFamily::identity();
  const ScalingFamily weibull(FamilyKind::Weibull, 3.0);
  const ScalingFamily gompertz(FamilyKind::Gompertz, 0.7);
  CHECK(iph_density(one_state(), unit_rate(), identity, 0.0) == 1.0);
  CHECK(iph_density(one_state(), unit_rate(), weibull, 1.0) ==
        doctest::Approx(3.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(iph_cdf(one_state(), unit_rate(), identity, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(iph_cdf(gompertz_pi(), gompertz_lambda(), gompertz, 0.0) == 0.0);

  for (int i = 1; i <= 100; ++i) {
    const double t = 0.03 * i;
    CHECK(std::abs(iph_density(one_state(), unit_rate(), identity, t) - std::exp(-t)) <= 1e-10);
    CHECK(std::abs(iph_cdf(one_state(), unit_rate(), identity, t) - (1 - std::exp(-t))) <= 1e-10);
    const double wd = 3.0 * t * t * std::exp(-t * t * t);
    CHECK(std::abs(iph_density(one_state(), unit_rate(), weibull, t) - wd) <= 1e-10);
    const double gi = (std::exp(0.7 * t) - 1.0) / 0.7;
    CHECK(std::abs(iph_density(one_state(), unit_rate(), gompertz, t) -
                   std::exp(0.7 * t) * std::exp(-gi)) <= 1e-10);
    CHECK(std::abs(iph_cdf(one_state(), unit_rate(), gompertz, t) - (1.0 - std::exp(-gi))) <= 1e-10);
  }
}

TEST_CASE("Weibull density integrates to one") {
  const ScalingFamily weibull(FamilyKind::Weibull, 3.0);
  auto f = [&](double t) { return iph_density(halves(), weibull_lambda(), weibull, t); };
  // Beyond t = 20 the survival is exp(-0.09 * 8000), far below 1e-6.
  double total = 0.0;
  for (int i = 0; i < 40; ++i) total += oracle::integrate(f, 0.5 * i, 0.5 * (i + 1), 1e-12);
  CHECK(std::abs(total - 1.0) <= 1e-6);
}

TEST_CASE("distribution function and density agree") {
  const ScalingFamily gompertz(FamilyKind::Gompertz, 0.1019);
  double previous = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double t = 0.8 * i;
    const double d = oracle::central_difference(
        [&](double u) { return iph_cdf(gompertz_pi(), gompertz_lambda(), gompertz, u); }, t, 1e-5);
    const double f = iph_density(gompertz_pi(), gompertz_lambda(), gompertz, t);
    CHECK(std::abs(d - f) <= 1e-6 * std::max(1.0, f));
    CHECK(f >= 0.0);
    const double cdf = iph_cdf(gompertz_pi(), gompertz_lambda(), gompertz, t);
    CHECK(cdf >= previous);
    CHECK(cdf <= 1.0);
    previous = cdf;
  }
}

TEST_CASE("beta objective equals the summed log density") {
  BetaObjective single{FamilyKind::Identity, one_state(), unit_rate(), {2.5}};
  CHECK(beta_loglik(single, 0.3) == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK(beta_loglik(single, 7.0) == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK(beta_gradient(single, 0.3) == 0.0);

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.1, 60.0);
  std::vector<double> times;
  for (int i = 0; i < 20; ++i) times.push_back(u(rng));
  const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
  double reference = 0.0;
  for (double t : times) {
    reference += std::log(iph_density(gompertz_pi(), gompertz_lambda(),
                                      ScalingFamily(FamilyKind::Gompertz, 0.1019), t));
  }
  CHECK(std::abs(beta_loglik(obj, 0.1019) - reference) <= 1e-10 * std::abs(reference));
}

TEST_CASE("beta gradient against finite differences") {
  const auto gomp_times = gompertz_sample(200, 31);
  const BetaObjective gomp{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), gomp_times};
  std::vector<double> wb_times;
  {
    const RandomStream root(32);
    for (std::uint64_t k = 0; k < 200; ++k) {
      RandomStream rng = root.substream({k});
      wb_times.push_back(simulate_inhomogeneous(weibull_lambda(), halves(),
                                                ScalingFamily(FamilyKind::Weibull, 3.0), kUnbounded,
                                                rng)
                             .end);
    }
  }
  const BetaObjective wb{FamilyKind::Weibull, halves(), weibull_lambda(), wb_times};
  for (const BetaObjective* obj : {&gomp, &wb}) {
    for (double beta : {0.05, 0.1019, 0.5, 3.0}) {
      const double fd = oracle::central_difference(
          [&](double b) { return beta_loglik(*obj, b); }, beta, 1e-6);
      const double g = beta_gradient(*obj, beta);
      CHECK(std::abs(fd - g) <= 1e-5 * std::max(1.0, std::abs(g)));
    }
  }
}

TEST_CASE("generic Gompertz gradient equals the closed-form derivative") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> beta_dist(0.02, 0.3);
  std::uniform_real_distribution<double> t_dist(0.5, 40.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double beta = beta_dist(rng);
    std::vector<double> times;
    for (int i = 0; i < 10; ++i) times.push_back(t_dist(rng));
    const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
    const double generic = beta_gradient(obj, beta);
    const double closed = oracle::gompertz_loglik_derivative(gompertz_pi().probabilities(),
                                                             gompertz_lambda().entries(), beta, times);
    CHECK(std::abs(generic - closed) <= 1e-9 * std::max(1.0, std::abs(closed)));
  }
}

TEST_CASE("log-likelihood peaks near the true beta") {
  const auto times = gompertz_sample(10000, 41);
  const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
  double best_beta = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 100; ++i) {
    const double beta = 0.05 + 0.001 * i;
    const double v = beta_loglik(obj, beta);
    if (v > best) {
      best = v;
      best_beta = beta;
    }
  }
  CHECK(std::abs(best_beta - 0.1019) <= 0.005);
}

TEST_CASE("underflow is reported") {
  const BetaObjective obj{FamilyKind::Identity, one_state(), unit_rate(), {1.0, 1e6}};
  // exp(-1e6) is representable through the scaled exponential.
  CHECK(std::isfinite(beta_loglik(obj, 1.0)));
  Matrix m(2, 2);
  m << 0, 0, 1, -2;
  Vector start(2);
  start << 1, 0;
  // State 1 never leaves, so the density is exactly zero.
  const BetaObjective tiny{FamilyKind::Identity, InitialDistribution(start), SubIntensityMatrix(m),
                           {0.5}};
  const auto eval = evaluate_objective(tiny, 1.0);
  REQUIRE(eval.underflow_index.has_value());
  CHECK(*eval.underflow_index == 0);
  CHECK(eval.value == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(beta_gradient(tiny, 1.0), NumericalError);
}

TEST_CASE("gradient ascent") {
  SUBCASE("identity family stops after one step") {
    const BetaObjective obj{FamilyKind::Identity, one_state(), unit_rate(), {1.0, 2.0}};
    const auto r = gd_solve(obj, 0.7, GdSettings{1e-3, 0.01, 1e-5, 100});
    CHECK(r.beta == 0.7);
    CHECK(r.steps == 1);
  }
  SUBCASE("monotone climb from below") {
    const auto times = gompertz_sample(1000, 43);
    const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
    const auto r = gd_solve(obj, 0.05, GdSettings{1e-6, 0.01, 1e-5, 100000});
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      CHECK(r.trace[i].beta > r.trace[i - 1].beta);
    }
    CHECK(r.steps == static_cast<int>(r.trace.size()) - 1);
    CHECK(std::abs(r.beta - 0.1019) <= 0.02);
  }
  SUBCASE("clamped at beta_min") {
    // Far too large a beta: the gradient is hugely negative.
    const auto times = gompertz_sample(50, 47);
    const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
    const auto r = gd_solve(obj, 1.0, GdSettings{1e-6, 1e9, 1e-5, 10});
    CHECK(r.trace[1].beta == 1e-5);
    CHECK(r.beta >= 1e-5);
  }
  SUBCASE("non-convergence carries the trace") {
    const auto times = gompertz_sample(100, 53);
    const BetaObjective obj{FamilyKind::Gompertz, gompertz_pi(), gompertz_lambda(), times};
    try {
      gd_solve(obj, 0.02, GdSettings{1e-9, 1e-12, 1e-5, 5});
      FAIL("expected non-convergence");
    } catch (const GdNonConvergence& e) {
      CHECK(e.trace().size() == 6);
    }
  }
  SUBCASE("invalid settings") {
    const BetaObjective obj{FamilyKind::Identity, one_state(), unit_rate(), {1.0}};
    CHECK_THROWS_AS(gd_solve(obj, 1.0, GdSettings{0.0, 0.01, 1e-5, 10}), InputError);
    CHECK_THROWS_AS(gd_solve(obj, 1e-6, GdSettings{1e-3, 0.01, 1e-5, 10}), InputError);
  }
}
