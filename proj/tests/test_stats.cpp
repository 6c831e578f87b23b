#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ldsim/rng.hpp"
#include "ldsim/stats.hpp"

using namespace ldsim;

TEST_CASE("accumulator merge equals bulk accumulation") {
  Rng rng(5);
  std::vector<double> xs(1000);
  for (double& x : xs) x = rng.normal();
  Accumulator whole, left, right;
  for (std::size_t i = 0; i < xs.size(); ++i) (i < 400 ? left : right).add(xs[i]);
  for (double x : xs) whole.add(x);
  Accumulator merged = left;
  merged.merge(right);
  CHECK(merged.count() == whole.count());
  CHECK(merged.mean() == doctest::Approx(whole.mean()).epsilon(1e-12));
  CHECK(merged.variance() == doctest::Approx(whole.variance()).epsilon(1e-12));
}

TEST_CASE("ks statistic of identical samples is zero") {
  std::vector<double> xs(50);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  const KsResult ks = ks_two_sample(xs, xs);
  CHECK(ks.stat == 0.0);
  CHECK(ks.p_value == 1.0);
}

TEST_CASE("ks p-values match reference values") {
  // Frozen with scipy.stats.kstwobign.sf((ne + 0.12 + 0.11/ne)*D),
  // ne = sqrt(n*m/(n+m)).
  CHECK(kolmogorov_tail(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-9));
  CHECK(kolmogorov_tail(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-9));
  CHECK(kolmogorov_tail(2.0) == doctest::Approx(0.0006709252557796953).epsilon(1e-6));
}

TEST_CASE("ks p-value is roughly uniform under the null") {
  Rng rng(31);
  int below_02 = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(200), b(200);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    if (ks_two_sample(a, b).p_value < 0.2) ++below_02;
  }
  CHECK(below_02 >= 5);
  CHECK(below_02 <= 40);
}

TEST_CASE("ks rejects a shifted alternative") {
  Rng rng(77);
  std::vector<double> a(500), b(500);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal() + 1.0;
  CHECK(ks_two_sample(a, b).p_value < 1e-6);
  std::vector<double> tiny(10, 0.0);
  CHECK_THROWS_AS(ks_two_sample(tiny, a), std::invalid_argument);
}

TEST_CASE("moment test on centered samples passes at 3 sigma") {
  Rng rng(9);
  std::vector<double> xs(2000);
  for (double& x : xs) x = rng.normal();
  const MomentTest mt = moment_test(xs, 0.0, 3.0, "mean");
  CHECK(mt.pass);
  CHECK(mt.se > 0.0);
  const MomentTest bad = moment_test(xs, 1.0, 3.0, "mean");
  CHECK(!bad.pass);
}

TEST_CASE("variance standard error is consistent with resampling scale") {
  Rng rng(13);
  std::vector<double> xs(4000);
  for (double& x : xs) x = rng.normal();
  // For a standard normal, Var(s^2) ~ 2/n, so SE ~ sqrt(2/4000) ~ 0.0224.
  const double se = variance_standard_error(xs);
  CHECK(se > 0.015);
  CHECK(se < 0.03);
}
