#include "phsem/likelihood.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace phsem {

SufficientStatistics::SufficientStatistics(int n)
    : starts(CountVector::Zero(n)),
      transitions(CountMatrix::Zero(n, n)),
      absorptions(CountVector::Zero(n)),
      occupation(Vector::Zero(n)) {}

SufficientStatistics& SufficientStatistics::operator+=(const SufficientStatistics& other) {
  if (other.size() != size()) throw InputError("cannot merge statistics of different sizes");
  starts += other.starts;
  transitions += other.transitions;
  absorptions += other.absorptions;
  occupation += other.occupation;
  return *this;
}

void add_path(SufficientStatistics& stats, const ContinuousPath& path) {
  if (path.timeline != Timeline::Homogeneous) {
    throw InputError("sufficient statistics need paths on the homogeneous timeline");
  }
  const int n = stats.size();
  if (path.states.empty()) return;
  const int x0 = path.states.front();
  if (x0 < 0 || x0 >= n) throw InputError("path starts outside the transient states");
  stats.starts(x0) += 1;
  for (std::size_t i = 0; i + 1 < path.states.size(); ++i) {
    const int from = path.states[i];
    const int to = path.states[i + 1];
    stats.occupation(from) += path.times[i + 1] - path.times[i];
    if (to == n) {
      stats.absorptions(from) += 1;
    } else {
      stats.transitions(from, to) += 1;
    }
  }
  const int last = path.states.back();
  if (last != n) stats.occupation(last) += path.end - path.times.back();
}

SufficientStatistics accumulate_statistics(int n, std::span<const ContinuousPath> paths) {
  SufficientStatistics stats(n);
  for (const auto& p : paths) add_path(stats, p);
  return stats;
}

SubIntensityMatrix mle_rates(const SufficientStatistics& stats) {
  const int n = stats.size();
  Matrix rates = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    const double r = stats.occupation(x);
    if (!(r > 0.0)) {
      throw StarvedStateError("state " + std::to_string(x + 1) +
                                  " has zero occupation time; its rates are not identifiable "
                                  "(consider merging or removing the state)",
                              x + 1);
    }
    double total = static_cast<double>(stats.absorptions(x)) / r;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      rates(x, y) = static_cast<double>(stats.transitions(x, y)) / r;
      total += rates(x, y);
    }
    rates(x, x) = -total;
  }
  return SubIntensityMatrix(std::move(rates));
}

GeneratorEstimate mle_generator(const SufficientStatistics& stats, std::int64_t path_count) {
  if (path_count <= 0) throw InputError("MLE needs at least one path");
  Vector pi = stats.starts.cast<double>() / static_cast<double>(path_count);
  return GeneratorEstimate{InitialDistribution(std::move(pi)), mle_rates(stats)};
}

double complete_loglik(const SufficientStatistics& stats, const InitialDistribution& pi,
                       const SubIntensityMatrix& lambda) {
  const int n = stats.size();
  const Vector exits = exit_rates(lambda);
  // 0 * log(0) contributes nothing.
  auto term = [](std::int64_t count, double rate) {
    return count == 0 ? 0.0 : static_cast<double>(count) * std::log(rate);
  };
  double ll = 0.0;
  for (int x = 0; x < n; ++x) {
    ll += term(stats.starts(x), pi[x]);
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      ll += term(stats.transitions(x, y), lambda(x, y)) - lambda(x, y) * stats.occupation(x);
    }
    ll += term(stats.absorptions(x), exits(x)) - exits(x) * stats.occupation(x);
  }
  return ll;
}

double iph_density(const InitialDistribution& pi, const SubIntensityMatrix& lambda,
                   const ScalingFamily& family, double t) {
  const Matrix e = matrix_exponential(lambda.entries(), family.g_inv(t));
  return family.h(t) * pi.probabilities().dot(e * exit_rates(lambda));
}

double iph_cdf(const InitialDistribution& pi, const SubIntensityMatrix& lambda,
               const ScalingFamily& family, double t) {
  const Matrix e = matrix_exponential(lambda.entries(), family.g_inv(t));
  return 1.0 - pi.probabilities().dot(e.rowwise().sum());
}

ObjectiveEvaluation evaluate_objective(const BetaObjective& objective, double beta) {
  const ScalingFamily family = objective.family == FamilyKind::Identity
                                   ? ScalingFamily::identity()
                                   : ScalingFamily(objective.family, beta);
  const Vector exits = exit_rates(objective.lambda);
  const Vector lambda_exits = objective.lambda.entries() * exits;
  const RowVector pi = objective.pi.probabilities().transpose();

  ObjectiveEvaluation out;
  for (std::size_t k = 0; k < objective.absorption_times.size(); ++k) {
    const double t = objective.absorption_times[k];
    const auto e = scaled_matrix_exponential(objective.lambda.entries(), family.g_inv(t));
    const RowVector u = pi * e.mantissa;
    const double density = u.dot(exits);
    if (!(density > 0.0)) {
      out.value = -std::numeric_limits<double>::infinity();
      out.gradient = std::numeric_limits<double>::quiet_NaN();
      out.underflow_index = k;
      return out;
    }
    out.value += family.log_h(t) + e.log_scale + std::log(density);
    if (family.has_beta()) {
      out.gradient +=
          family.dlog_h_dbeta(t) + family.dg_inv_dbeta(t) * u.dot(lambda_exits) / density;
    }
  }
  return out;
}

double beta_loglik(const BetaObjective& objective, double beta) {
  return evaluate_objective(objective, beta).value;
}

namespace {

[[noreturn]] void throw_underflow(const BetaObjective& objective, std::size_t index, double beta) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "density is zero at absorption time #" << index + 1 << " (t = "
      << objective.absorption_times[index] << ", beta = " << beta << ")";
  throw NumericalError(msg.str());
}

}  // namespace

double beta_gradient(const BetaObjective& objective, double beta) {
  const auto eval = evaluate_objective(objective, beta);
  if (eval.underflow_index) throw_underflow(objective, *eval.underflow_index, beta);
  return eval.gradient;
}

GdResult gd_solve(const BetaObjective& objective, double beta0, const GdSettings& settings) {
  if (!(settings.eta > 0.0)) throw InputError("GD step size eta must be > 0");
  if (!(settings.e_ell > 0.0)) throw InputError("GD threshold e_ell must be > 0");
  if (!(settings.beta_min > 0.0)) throw InputError("beta_min must be > 0");
  if (!(beta0 >= settings.beta_min)) throw InputError("beta0 must be >= beta_min");
  if (settings.max_steps < 1) throw InputError("GD max_steps must be >= 1");

  GdResult result;
  double beta = beta0;
  auto current = evaluate_objective(objective, beta);
  if (current.underflow_index) throw_underflow(objective, *current.underflow_index, beta);
  result.trace.push_back({0, beta, current.value, current.gradient});

  for (int step = 1; step <= settings.max_steps; ++step) {
    const double next_beta = std::max(settings.beta_min, beta + settings.eta * current.gradient);
    const auto next = evaluate_objective(objective, next_beta);
    if (next.underflow_index) throw_underflow(objective, *next.underflow_index, next_beta);
    result.trace.push_back({step, next_beta, next.value, next.gradient});
    if (std::abs(next.value - current.value) < settings.e_ell) {
      result.beta = next_beta;
      result.steps = step;
      return result;
    }
    beta = next_beta;
    current = next;
  }
  throw GdNonConvergence("beta ascent did not converge within " +
                             std::to_string(settings.max_steps) + " steps",
                         std::move(result.trace));
}

}  // namespace phsem
