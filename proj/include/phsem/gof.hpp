#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "phsem/generator.hpp"
#include "phsem/random.hpp"
#include "phsem/scaling.hpp"

namespace phsem {

// Non-empty multiset of finite values, kept sorted.
class SampleSet {
 public:
  // Throws InputError when empty or when some value is not finite.
  explicit SampleSet(std::vector<double> values);

  std::size_t size() const { return sorted_.size(); }
  std::span<const double> sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// (#values <= t) / size
double ecdf(const SampleSet& s, double t);

struct KsResult {
  double statistic = 0.0;  // D
  double p_value = 1.0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
};

// Survival function of the limiting Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);

// Two-sided two-sample test; D is exact over the pooled jump points and the
// p-value is asymptotic with effective size n_a n_b / (n_a + n_b).
KsResult ks_two_sample(const SampleSet& a, const SampleSet& b);

// One-sample two-sided test against a continuous CDF (asymptotic p-value).
KsResult ks_one_sample(const SampleSet& s, const std::function<double(double)>& cdf);

struct EcdfRow {
  double t;
  double a;
  double b;
};
// Both ECDFs evaluated at every distinct pooled value.
std::vector<EcdfRow> ecdf_table(const SampleSet& a, const SampleSet& b);

// Absorption times of `count` unconditioned paths of the scaled model,
// path i drawing from rng.substream({i}).
std::vector<double> simulate_absorption_times(const InitialDistribution& pi,
                                              const SubIntensityMatrix& lambda,
                                              const ScalingFamily& family, std::size_t count,
                                              const RandomStream& rng);

}  // namespace phsem
