#pragma once

#include <cstdint>
#include <vector>

namespace ldsim {

// Drift of the total-mass process at mass v and type-A frequency p:
//   f(v, p) = b p v - 2 c p (1-p) v^2.
double drift_total_mass(double v, double mu_a, double b, double c);

// f evaluated with v clamped to [1/M, M].
double drift_total_mass_truncated(double v, double mu_a, double b, double c, double M);

// One exponential-Euler step of the log-mass dynamics
//   d ln zeta = (f(zeta, mu_a) - 1/2) ds + dW,
// with f frozen at the left point.  Always strictly positive.
double step_log_mass(double zeta, double mu_a, double dt_s, double dw, double b, double c);

struct DirectPath {
  std::vector<double> times_t;
  std::vector<double> xi_a;
  std::vector<double> xi_b;
};

struct DirectConfig {
  double xa0 = 1.0;
  double xb0 = 1.0;
  double b = 0.0;
  double c = 0.0;
  double dt_t = 1e-3;
  double horizon_t = 1.0;
  double diffusion_scale = 1.0;  // 0 suppresses the noise (testing hook)
};

// Euler-Maruyama path of the two-type system
//   d xi_a = (b xi_a - c xi_a xi_b) dt + sqrt(xi_a) dW^A
//   d xi_b =        - c xi_a xi_b  dt + sqrt(xi_b) dW^B
// with each component clamped at 0 and absorbing thereafter.
DirectPath simulate_direct(const DirectConfig& cfg, std::uint64_t seed);

struct MassPath {
  std::vector<double> times_s;
  std::vector<double> zeta;
  std::vector<double> times_t;  // t(s) = int_0^s zeta du, filled by time_change
};

// Fills times_t with the trapezoidal cumulative integral of zeta over s.
void time_change(MassPath& path);

// Inverse of the time change by monotone linear interpolation; requires
// 0 <= t <= times_t.back().
double invert_time(const MassPath& path, double t);

}  // namespace ldsim
