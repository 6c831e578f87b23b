#include "ldsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ldsim {

void Accumulator::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double d = other.mean_ - mean_;
  mean_ += d * nb / (na + nb);
  m2_ += other.m2_ + d * d * na * nb / (na + nb);
  n_ += other.n_;
}

double Accumulator::variance() const {
  if (n_ < 2) throw std::invalid_argument("Accumulator::variance: need >= 2 samples");
  return m2_ / static_cast<double>(n_ - 1);
}

double Accumulator::standard_error() const {
  return std::sqrt(variance() / static_cast<double>(n_));
}

MeanSe mean_se(std::span<const double> xs) {
  Accumulator acc;
  for (double x : xs) acc.add(x);
  MeanSe out;
  out.n = acc.count();
  out.mean = acc.count() ? acc.mean() : 0.0;
  out.se = acc.count() >= 2 ? acc.standard_error() : 0.0;
  return out;
}

double variance_standard_error(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) throw std::invalid_argument("variance_standard_error: need >= 4 samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double s2 = m2 * nn / (nn - 1.0);
  const double var_of_var = (m4 - (nn - 3.0) / (nn - 1.0) * s2 * s2) / nn;
  return std::sqrt(std::max(var_of_var, 0.0));
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12 * std::abs(sum) || term < 1e-300) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 30 || b.size() < 30)
    throw std::invalid_argument("ks_two_sample: need >= 30 samples per side");
  std::vector<double> xs(a.begin(), a.end()), ys(b.begin(), b.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double na = static_cast<double>(xs.size()), nb = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double x = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= x) ++i;
    while (j < ys.size() && ys[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  KsResult out;
  out.stat = d;
  out.p_value = kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d);
  return out;
}

KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf) {
  if (xs.size() < 30) throw std::invalid_argument("ks_one_sample: need >= 30 samples");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double f = cdf(sorted[k]);
    d = std::max(d, std::abs(f - static_cast<double>(k) / n));
    d = std::max(d, std::abs(static_cast<double>(k + 1) / n - f));
  }
  const double sn = std::sqrt(n);
  KsResult out;
  out.stat = d;
  out.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
  return out;
}

MomentTest moment_test(std::span<const double> xs, double target, double tol_sigmas,
                       const std::string& name) {
  if (xs.size() < 2) throw std::invalid_argument("moment_test: need >= 2 samples");
  const MeanSe ms = mean_se(xs);
  MomentTest out;
  out.name = name;
  out.estimate = ms.mean;
  out.se = ms.se;
  out.target = target;
  out.sigmas = ms.se > 0.0 ? std::abs(ms.mean - target) / ms.se
                           : (ms.mean == target ? 0.0 : std::numeric_limits<double>::infinity());
  out.pass = out.sigmas <= tol_sigmas;
  return out;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("pearson_correlation: size mismatch");
  const MeanSe mx = mean_se(xs), my = mean_se(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mx.mean, dy = ys[k] - my.mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ldsim
