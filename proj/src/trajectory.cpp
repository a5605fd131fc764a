#include "phsem/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "phsem/errors.hpp"

namespace phsem {

int ContinuousPath::state_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) throw DomainError("time precedes the start of the path");
  return states[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

std::size_t PanelObservationSet::absorbed_count() const {
  return static_cast<std::size_t>(
      std::count_if(paths.begin(), paths.end(), [&](const PanelPath& p) { return p.absorbed(n); }));
}

void PanelObservationSet::validate() const {
  if (n < 1) throw InputError("panel data needs at least one transient state");
  for (const auto& p : paths) {
    const std::string where = "path '" + p.id + "': ";
    if (p.times.empty() || p.times.size() != p.states.size()) {
      throw InputError(where + "empty or mismatched observation record");
    }
    if (p.times.front() != 0.0) throw InputError(where + "first observation time must be 0");
    for (std::size_t j = 0; j < p.times.size(); ++j) {
      if (!std::isfinite(p.times[j])) throw InputError(where + "non-finite observation time");
      if (j > 0 && !(p.times[j] > p.times[j - 1])) {
        throw InputError(where + "observation times must be strictly increasing");
      }
      if (p.states[j] < 0 || p.states[j] > n) throw InputError(where + "state out of range");
      if (p.states[j] == n && j + 1 != p.times.size()) {
        throw InputError(where + "absorbing state before the final observation");
      }
    }
    if (p.states.front() == n) throw InputError(where + "path starts in the absorbing state");
  }
}

JumpSampler::JumpSampler(const SubIntensityMatrix& m)
    : n_(m.size()), holding_(m.size()), cumulative_(m.size()), reaches_absorption_(m.size()) {
  const Vector exits = exit_rates(m);
  for (int x = 0; x < n_; ++x) {
    double total = exits(x);
    for (int y = 0; y < n_; ++y) {
      if (y != x) total += m(x, y);
    }
    holding_[x] = total;
    auto& cum = cumulative_[x];
    cum.assign(n_ + 1, 0.0);
    double acc = 0.0;
    for (int y = 0; y <= n_; ++y) {
      const double rate = y == n_ ? exits(x) : (y == x ? 0.0 : m(x, y));
      acc += rate;
      cum[y] = total > 0.0 ? acc / total : 0.0;
    }
    reaches_absorption_[x] = exits(x) > 0.0;
  }
  // Backward closure over positive transitions.
  for (bool changed = true; changed;) {
    changed = false;
    for (int x = 0; x < n_; ++x) {
      if (reaches_absorption_[x]) continue;
      for (int y = 0; y < n_; ++y) {
        if (y != x && m(x, y) > 0.0 && reaches_absorption_[y]) {
          reaches_absorption_[x] = true;
          changed = true;
          break;
        }
      }
    }
  }
}

int JumpSampler::next_state(int x, RandomStream& rng) const {
  const auto& cum = cumulative_[x];
  const double u = rng.uniform();
  // Zero-mass destinations (including x itself) are never the first bin above u.
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it != cum.end()) return static_cast<int>(std::distance(cum.begin(), it));
  // Round-off left the top bin just below 1.
  for (int y = n_; y >= 0; --y) {
    const double below = y == 0 ? 0.0 : cum[y - 1];
    if (cum[y] > below) return y;
  }
  return n_;
}

int JumpSampler::draw_initial(const InitialDistribution& pi, RandomStream& rng) const {
  if (pi.size() != n_) throw InputError("initial distribution size does not match the generator");
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int x = 0; x < n_; ++x) {
    if (pi[x] > 0.0) last_positive = x;
    acc += pi[x];
    if (u < acc && pi[x] > 0.0) return x;
  }
  return last_positive;
}

bool JumpSampler::evolve(int x, double start, double stop, RandomStream& rng,
                         ContinuousPath& path) const {
  double t = start;
  while (true) {
    const double rate = holding_[x];
    if (rate <= 0.0) {
      if (std::isinf(stop)) {
        throw StructuralError("state " + std::to_string(x + 1) +
                              " has no exit; an unbounded simulation would never end");
      }
      return false;
    }
    const double hold = rng.exponential(rate);
    if (t + hold > stop) return false;
    t += hold;
    x = next_state(x, rng);
    path.times.push_back(t);
    path.states.push_back(x);
    if (x == n_) return true;
  }
}

ContinuousPath simulate_homogeneous(const SubIntensityMatrix& m, const InitialDistribution& pi,
                                    double horizon, RandomStream& rng) {
  if (!(horizon >= 0.0)) throw DomainError("simulation horizon must be >= 0");
  const JumpSampler sampler(m);
  ContinuousPath path;
  path.timeline = Timeline::Homogeneous;
  const int x0 = sampler.draw_initial(pi, rng);
  path.times.push_back(0.0);
  path.states.push_back(x0);
  path.absorbed = sampler.evolve(x0, 0.0, horizon, rng, path);
  path.end = path.absorbed ? path.times.back() : horizon;
  return path;
}

ContinuousPath to_inhomogeneous(const ContinuousPath& homogeneous, const ScalingFamily& family,
                                double horizon) {
  ContinuousPath out = homogeneous;
  out.timeline = Timeline::Inhomogeneous;
  for (auto& t : out.times) t = family.g(t);
  out.end = out.absorbed ? out.times.back() : horizon;
  return out;
}

ContinuousPath simulate_inhomogeneous(const SubIntensityMatrix& m, const InitialDistribution& pi,
                                      const ScalingFamily& family, double horizon,
                                      RandomStream& rng) {
  if (!(horizon >= 0.0)) throw DomainError("simulation horizon must be >= 0");
  const double homogeneous_horizon = std::isinf(horizon) ? horizon : family.g_inv(horizon);
  return to_inhomogeneous(simulate_homogeneous(m, pi, homogeneous_horizon, rng), family, horizon);
}

PanelPath discretize(const ContinuousPath& path, std::span<const double> grid, int n) {
  if (grid.empty()) throw InputError("observation grid is empty");
  if (grid.front() != 0.0) throw InputError("observation grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InputError("observation grid must be increasing");
  }
  PanelPath out;
  const double absorption = path.absorbed ? path.end : kUnbounded;
  for (double t : grid) {
    if (t >= absorption) {
      out.times.push_back(t);
      out.states.push_back(n);
      break;
    }
    if (!path.absorbed && t > path.end) break;
    out.times.push_back(t);
    out.states.push_back(path.state_at(t));
  }
  return out;
}

BridgeSample bridge_sample(const JumpSampler& sampler, double s1, int x, double s2, int y,
                           RandomStream& rng, std::size_t max_attempts) {
  const int n = sampler.n();
  if (!(s1 < s2)) throw DomainError("bridge needs s1 < s2");
  if (x < 0 || x >= n) throw DomainError("bridge must start in a transient state");
  if (y < 0 || y > n) throw DomainError("bridge end state out of range");
  BridgeSample out;
  out.segment.timeline = Timeline::Homogeneous;
  while (out.attempts < max_attempts) {
    ++out.attempts;
    auto& seg = out.segment;
    seg.times.assign(1, s1);
    seg.states.assign(1, x);
    const bool absorbed = sampler.evolve(x, s1, s2, rng, seg);
    if (seg.states.back() == y) {
      seg.absorbed = absorbed;
      seg.end = absorbed ? seg.times.back() : s2;
      return out;
    }
  }
  throw BridgeBudgetError("bridge from state " + std::to_string(x + 1) + " to state " +
                              std::to_string(y + 1) + " over length " + std::to_string(s2 - s1) +
                              " not accepted after " + std::to_string(out.attempts) + " attempts",
                          out.attempts);
}

BridgeSample bridge_sample(const SubIntensityMatrix& m, double s1, int x, double s2, int y,
                           RandomStream& rng, std::size_t max_attempts) {
  return bridge_sample(JumpSampler(m), s1, x, s2, y, rng, max_attempts);
}

ContinuousPath complete_censored(const JumpSampler& sampler, int last_state, RandomStream& rng,
                                 double start) {
  if (last_state < 0 || last_state >= sampler.n()) {
    throw DomainError("censored completion must start in a transient state");
  }
  if (!sampler.absorption_reachable(last_state)) {
    throw StructuralError("absorption is unreachable from state " + std::to_string(last_state + 1));
  }
  ContinuousPath seg;
  seg.timeline = Timeline::Homogeneous;
  seg.times.push_back(start);
  seg.states.push_back(last_state);
  seg.absorbed = sampler.evolve(last_state, start, kUnbounded, rng, seg);
  seg.end = seg.times.back();
  return seg;
}

ContinuousPath complete_censored(const SubIntensityMatrix& m, int last_state, RandomStream& rng,
                                 double start) {
  return complete_censored(JumpSampler(m), last_state, rng, start);
}

}  // namespace phsem
