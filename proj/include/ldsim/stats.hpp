#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ldsim {

// Streaming mean/variance accumulator (Welford) with associative merge, so
// replica-parallel reductions give the same result in any grouping order as
// long as the final combine sequence is fixed.
class Accumulator {
 public:
  void add(double x);
  void merge(const Accumulator& other);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;        // unbiased, needs count >= 2
  double standard_error() const;  // sqrt(variance / n)
  double m2() const { return m2_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

// Standard error of the sample variance from empirical moments:
// Var(s^2) ~ (m4 - (n-3)/(n-1) s^4) / n.
double variance_standard_error(std::span<const double> xs);

struct KsResult {
  double stat = 0.0;
  double p_value = 1.0;
};

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_tail(double lambda);

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
// (effective size n*m/(n+m), Stephens' small-sample correction).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// One-sample test of xs against a continuous CDF.
KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf);

struct MomentTest {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double target = 0.0;
  double sigmas = 0.0;  // |estimate - target| / se
  bool pass = false;
};

// z-test of the sample mean against a target at tol_sigmas standard errors.
MomentTest moment_test(std::span<const double> xs, double target, double tol_sigmas,
                       const std::string& name = "");

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace ldsim
