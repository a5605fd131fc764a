#include "phsem/gof.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "phsem/errors.hpp"
#include "phsem/trajectory.hpp"

namespace phsem {

SampleSet::SampleSet(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw InputError("sample is empty");
  for (double v : sorted_) {
    if (!std::isfinite(v)) throw InputError("sample contains a non-finite value");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double ecdf(const SampleSet& s, double t) {
  const auto v = s.sorted();
  const auto below = std::upper_bound(v.begin(), v.end(), t) - v.begin();
  return static_cast<double>(below) / static_cast<double>(v.size());
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Dual (Jacobi theta) form converges fast for small x.
    const double pi = std::numbers::pi;
    const double y = -pi * pi / (8.0 * x * x);
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(odd * odd * y);
      cdf += term;
      if (term < 1e-17 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(const SampleSet& a, const SampleSet& b) {
  const auto va = a.sorted();
  const auto vb = b.sorted();
  const double na = static_cast<double>(va.size());
  const double nb = static_cast<double>(vb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < va.size() && j < vb.size()) {
    const double t = std::min(va[i], vb[j]);
    while (i < va.size() && va[i] == t) ++i;
    while (j < vb.size() && vb[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult out;
  out.statistic = d;
  out.size_a = va.size();
  out.size_b = vb.size();
  const double effective = na * nb / (na + nb);
  out.p_value = kolmogorov_survival(std::sqrt(effective) * d);
  return out;
}

KsResult ks_one_sample(const SampleSet& s, const std::function<double(double)>& cdf) {
  const auto v = s.sorted();
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KsResult out;
  out.statistic = d;
  out.size_a = v.size();
  out.p_value = kolmogorov_survival(std::sqrt(n) * d);
  return out;
}

std::vector<EcdfRow> ecdf_table(const SampleSet& a, const SampleSet& b) {
  std::vector<double> pooled(a.sorted().begin(), a.sorted().end());
  pooled.insert(pooled.end(), b.sorted().begin(), b.sorted().end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  std::vector<EcdfRow> rows;
  rows.reserve(pooled.size());
  for (double t : pooled) rows.push_back({t, ecdf(a, t), ecdf(b, t)});
  return rows;
}

std::vector<double> simulate_absorption_times(const InitialDistribution& pi,
                                              const SubIntensityMatrix& lambda,
                                              const ScalingFamily& family, std::size_t count,
                                              const RandomStream& rng) {
  std::vector<double> times;
  times.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto stream = rng.substream({i});
    times.push_back(simulate_inhomogeneous(lambda, pi, family, kUnbounded, stream).end);
  }
  return times;
}

}  // namespace phsem
