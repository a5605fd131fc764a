#include "phsem/sem.hpp"

#include <cmath>
#include <sstream>

#include "phsem/errors.hpp"

namespace phsem {

void FitConfig::validate() const {
  if (!(eta > 0.0)) throw InputError("eta must be > 0");
  if (!(e_ell > 0.0)) throw InputError("e_ell must be > 0");
  if (!(beta_min > 0.0)) throw InputError("beta_min must be > 0");
  if (!(beta0 >= beta_min)) throw InputError("beta0 must be >= beta_min");
  if (max_gd_steps < 1) throw InputError("max_gd_steps must be >= 1");
  if (max_sem_iterations < 1) throw InputError("max_sem_iterations must be >= 1");
  if (homog_iterations < 1) throw InputError("homog_iterations must be >= 1");
  if (homog_tail_average < 1 || homog_tail_average > homog_iterations) {
    throw InputError("homog_tail_average must be in [1, homog_iterations]");
  }
  if (bridge_max_attempts < 1) throw InputError("bridge_max_attempts must be >= 1");
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::SingleUpdateConverged: return "single-update-converged";
    case Termination::MaxIterations: return "max-iterations";
    case Termination::FixedIterations: return "fixed-iterations";
    case Termination::Error: return "error";
  }
  return "error";
}

Termination parse_termination(const std::string& name) {
  for (auto t : {Termination::SingleUpdateConverged, Termination::MaxIterations,
                 Termination::FixedIterations, Termination::Error}) {
    if (termination_name(t) == name) return t;
  }
  throw InputError("unknown termination '" + name + "'");
}

InitialDistribution empirical_pi(const PanelObservationSet& data) {
  if (data.paths.empty()) throw InputError("no paths to estimate the initial distribution from");
  Vector counts = Vector::Zero(data.n);
  for (const auto& p : data.paths) {
    const int x0 = p.states.front();
    if (x0 < 0 || x0 >= data.n) throw InputError("path '" + p.id + "' does not start transient");
    counts(x0) += 1.0;
  }
  counts /= static_cast<double>(data.paths.size());
  // Renormalize so the sum is 1 up to the last ulp.
  counts /= counts.sum();
  return InitialDistribution(std::move(counts));
}

ContinuousPath naive_path(const PanelPath& path, int n) {
  ContinuousPath out;
  out.timeline = Timeline::Homogeneous;
  out.times.push_back(path.times.front());
  out.states.push_back(path.states.front());
  for (std::size_t j = 1; j < path.states.size(); ++j) {
    if (path.states[j] != out.states.back()) {
      out.times.push_back(path.times[j]);
      out.states.push_back(path.states[j]);
    }
  }
  out.absorbed = out.states.back() == n;
  out.end = path.times.back();
  return out;
}

namespace {

ScalingFamily family_at(FamilyKind kind, double beta) {
  return kind == FamilyKind::Identity ? ScalingFamily::identity() : ScalingFamily(kind, beta);
}

template <typename Fn>
auto with_retry(const RandomStream& rng, int iteration, std::size_t k, Fn&& fn) {
  try {
    auto stream = rng.substream({static_cast<std::uint64_t>(iteration), k, 0});
    return fn(stream);
  } catch (const BridgeBudgetError&) {
    auto stream = rng.substream({static_cast<std::uint64_t>(iteration), k, 1});
    return fn(stream);
  }
}

std::string annotate(int iteration, const PanelPath& path, const std::string& what) {
  std::ostringstream msg;
  msg << "iteration " << iteration << ", path '" << path.id << "': " << what;
  return msg.str();
}

}  // namespace

Initialization initialize(const PanelObservationSet& data, const FitConfig& cfg,
                          const RandomStream& rng) {
  Initialization init{empirical_pi(data), SubIntensityMatrix(), cfg.beta0, 0, {}, {}, {}};

  SufficientStatistics naive(data.n);
  for (const auto& p : data.paths) add_path(naive, naive_path(p, data.n));
  init.lambda0 = mle_rates(naive);

  const JumpSampler sampler(init.lambda0);
  for (std::size_t k = 0; k < data.paths.size(); ++k) {
    const auto& p = data.paths[k];
    if (!p.absorbed(data.n)) continue;
    const std::size_t m = p.times.size() - 1;
    try {
      const auto bridge = with_retry(rng, 0, k, [&](RandomStream& stream) {
        return bridge_sample(sampler, p.times[m - 1], p.states[m - 1], p.times[m], data.n, stream,
                             cfg.bridge_max_attempts);
      });
      init.absorption_times.push_back(bridge.segment.end);
    } catch (const BridgeBudgetError& e) {
      throw BridgeBudgetError(annotate(0, p, e.what()), e.attempts());
    }
  }

  if (init.absorption_times.empty()) {
    init.warnings.push_back("no absorbed paths; beta refinement skipped at initialization");
    return init;
  }
  if (cfg.family == FamilyKind::Identity) return init;

  const BetaObjective objective{cfg.family, init.pi, init.lambda0, init.absorption_times};
  auto gd = gd_solve(objective, cfg.beta0, cfg.gd());
  init.beta = gd.beta;
  init.gd_updates = gd.steps;
  init.gd_trace = std::move(gd.trace);
  return init;
}

std::vector<ContinuousPath> complete_paths(const PanelObservationSet& data,
                                           const SubIntensityMatrix& lambda,
                                           const ScalingFamily& family, const FitConfig& cfg,
                                           const RandomStream& rng, int iteration) {
  const JumpSampler sampler(lambda);
  std::vector<ContinuousPath> completed(data.paths.size());
  for (std::size_t k = 0; k < data.paths.size(); ++k) {
    const auto& p = data.paths[k];
    std::vector<double> s(p.times.size());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = family.g_inv(p.times[j]);

    auto build = [&](RandomStream& stream) {
      ContinuousPath path;
      path.timeline = Timeline::Homogeneous;
      path.times.push_back(s.front());
      path.states.push_back(p.states.front());
      for (std::size_t j = 0; j + 1 < s.size(); ++j) {
        auto bridge = bridge_sample(sampler, s[j], p.states[j], s[j + 1], p.states[j + 1], stream,
                                    cfg.bridge_max_attempts);
        const auto& seg = bridge.segment;
        path.times.insert(path.times.end(), seg.times.begin() + 1, seg.times.end());
        path.states.insert(path.states.end(), seg.states.begin() + 1, seg.states.end());
      }
      if (path.states.back() != data.n) {
        const auto tail = complete_censored(sampler, path.states.back(), stream, s.back());
        path.times.insert(path.times.end(), tail.times.begin() + 1, tail.times.end());
        path.states.insert(path.states.end(), tail.states.begin() + 1, tail.states.end());
      }
      path.absorbed = true;
      path.end = path.times.back();
      return path;
    };

    try {
      completed[k] = with_retry(rng, iteration, k, build);
    } catch (const BridgeBudgetError& e) {
      throw BridgeBudgetError(annotate(iteration, p, e.what()), e.attempts());
    } catch (const StructuralError& e) {
      throw StructuralError(annotate(iteration, p, e.what()));
    }
  }
  return completed;
}

IterationOutcome sem_iteration(const PanelObservationSet& data, const SemState& state,
                               const FitConfig& cfg, const RandomStream& rng, int iteration) {
  const ScalingFamily family = family_at(cfg.family, state.beta);
  const auto completed = complete_paths(data, state.lambda, family, cfg, rng, iteration);

  IterationOutcome out;
  try {
    out.lambda = mle_rates(accumulate_statistics(data.n, completed));
  } catch (const StarvedStateError& e) {
    throw StarvedStateError("iteration " + std::to_string(iteration) + ": " + e.what(), e.state());
  }

  if (cfg.family == FamilyKind::Identity) {
    out.beta = state.beta;
    out.gd_updates = 1;
    return out;
  }

  // Absorption epochs go back to the inhomogeneous clock with the beta that
  // produced them; beta is updated afterwards.
  BetaObjective objective{cfg.family, state.pi, out.lambda, {}};
  objective.absorption_times.reserve(completed.size());
  for (const auto& path : completed) objective.absorption_times.push_back(family.g(path.end));

  try {
    auto gd = gd_solve(objective, state.beta, cfg.gd());
    out.beta = gd.beta;
    out.gd_updates = gd.steps;
    out.gd_trace = std::move(gd.trace);
  } catch (const GdNonConvergence& e) {
    throw GdNonConvergence("iteration " + std::to_string(iteration) + ": " + e.what(), e.trace());
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(iteration) + ": " + e.what());
  }
  return out;
}

namespace {

void check_temporal_information(const PanelObservationSet& data) {
  data.validate();
  if (data.paths.empty()) throw InputError("panel data contains no paths");
  for (const auto& p : data.paths) {
    if (p.times.size() > 1) return;
  }
  throw InputError("no temporal information: every path is a single observation at t = 0");
}

void append_gd_trace(FitResult& result, int iteration, const std::vector<GdStep>& steps) {
  for (const auto& s : steps) result.beta_trace.push_back({iteration, s});
}

}  // namespace

FitResult fit(const PanelObservationSet& data, const FitConfig& cfg, const RandomStream& rng) {
  cfg.validate();
  if (cfg.homogeneous_mode || cfg.family == FamilyKind::Identity) {
    return fit_homogeneous(data, cfg, rng);
  }
  check_temporal_information(data);

  auto init = initialize(data, cfg, rng);
  FitResult result;
  result.family = cfg.family;
  result.pi_hat = init.pi;
  result.warnings = init.warnings;
  const std::size_t absorbed = data.absorbed_count();
  result.trace.push_back({0, init.lambda0.entries(), init.beta, init.gd_updates, absorbed});
  append_gd_trace(result, 0, init.gd_trace);

  SemState state{init.pi, init.lambda0, init.beta};
  result.termination = Termination::MaxIterations;
  for (int it = 1; it <= cfg.max_sem_iterations; ++it) {
    IterationOutcome outcome;
    try {
      outcome = sem_iteration(data, state, cfg, rng, it);
    } catch (const EstimationError& e) {
      result.termination = Termination::Error;
      result.message = e.what();
      break;
    } catch (const NumericalError& e) {
      result.termination = Termination::Error;
      result.message = e.what();
      break;
    }
    state.lambda = outcome.lambda;
    state.beta = outcome.beta;
    result.iterations_used = it;
    result.trace.push_back({it, state.lambda.entries(), state.beta, outcome.gd_updates, absorbed});
    append_gd_trace(result, it, outcome.gd_trace);
    if (outcome.gd_updates == 1) {
      result.termination = Termination::SingleUpdateConverged;
      break;
    }
  }
  result.lambda_hat = state.lambda;
  result.beta_hat = state.beta;
  return result;
}

FitResult fit(const PanelObservationSet& data, const FitConfig& cfg) {
  return fit(data, cfg, RandomStream(cfg.seed));
}

FitResult fit_homogeneous(const PanelObservationSet& data, const FitConfig& cfg,
                          const RandomStream& rng) {
  cfg.validate();
  check_temporal_information(data);
  FitConfig homogeneous = cfg;
  homogeneous.family = FamilyKind::Identity;
  homogeneous.homogeneous_mode = true;

  auto init = initialize(data, homogeneous, rng);
  FitResult result;
  result.family = FamilyKind::Identity;
  result.pi_hat = init.pi;
  result.warnings = init.warnings;
  const std::size_t absorbed = data.absorbed_count();
  result.trace.push_back({0, init.lambda0.entries(), std::nullopt, 0, absorbed});

  const int n = data.n;
  SemState state{init.pi, init.lambda0, 1.0};
  Matrix off_diagonal_sum = Matrix::Zero(n, n);
  Vector exit_sum = Vector::Zero(n);
  const int tail_start = homogeneous.homog_iterations - homogeneous.homog_tail_average + 1;
  for (int it = 1; it <= homogeneous.homog_iterations; ++it) {
    try {
      state.lambda = sem_iteration(data, state, homogeneous, rng, it).lambda;
    } catch (const EstimationError& e) {
      result.termination = Termination::Error;
      result.message = e.what();
      result.lambda_hat = state.lambda;
      return result;
    }
    result.iterations_used = it;
    result.trace.push_back({it, state.lambda.entries(), std::nullopt, 0, absorbed});
    if (it >= tail_start) {
      Matrix off = state.lambda.entries();
      off.diagonal().setZero();
      off_diagonal_sum += off;
      exit_sum += exit_rates(state.lambda);
    }
  }
  const double count = homogeneous.homog_tail_average;
  Matrix averaged = off_diagonal_sum / count;
  const Vector exits = exit_sum / count;
  for (int x = 0; x < n; ++x) {
    double total = exits(x);
    for (int y = 0; y < n; ++y) {
      if (y != x) total += averaged(x, y);
    }
    averaged(x, x) = -total;
  }
  result.lambda_hat = SubIntensityMatrix(std::move(averaged));
  result.termination = Termination::FixedIterations;
  return result;
}

}  // namespace phsem
