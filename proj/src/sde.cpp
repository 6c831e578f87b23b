#include "ldsim/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ldsim/rng.hpp"

namespace ldsim {

double drift_total_mass(double v, double mu_a, double b, double c) {
  if (mu_a < 0.0 || mu_a > 1.0)
    throw std::invalid_argument("drift_total_mass: mu_a must be in [0,1]");
  return b * mu_a * v - 2.0 * c * mu_a * (1.0 - mu_a) * v * v;
}

double drift_total_mass_truncated(double v, double mu_a, double b, double c, double M) {
  if (M <= 1.0) throw std::invalid_argument("drift_total_mass_truncated: M must be > 1");
  const double clamped = std::min(std::max(v, 1.0 / M), M);
  return drift_total_mass(clamped, mu_a, b, c);
}

double step_log_mass(double zeta, double mu_a, double dt_s, double dw, double b, double c) {
  if (zeta <= 0.0) throw std::invalid_argument("step_log_mass: zeta must be positive");
  const double out = zeta * std::exp((drift_total_mass(zeta, mu_a, b, c) - 0.5) * dt_s + dw);
  // Positivity is structural; guard the one way it can fail in floating
  // point, underflow of the exponential for extreme drifts.
  return std::max(out, std::numeric_limits<double>::min());
}

DirectPath simulate_direct(const DirectConfig& cfg, std::uint64_t seed) {
  if (cfg.xa0 < 0.0 || cfg.xb0 < 0.0)
    throw std::invalid_argument("simulate_direct: initial masses must be >= 0");
  if (cfg.dt_t <= 0.0) throw std::invalid_argument("simulate_direct: dt_t must be > 0");
  if (cfg.horizon_t < 0.0) throw std::invalid_argument("simulate_direct: horizon must be >= 0");

  Rng rng(derive_seed(seed, seed_tag::kDirectNoise));
  const std::size_t n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon_t / cfg.dt_t));
  DirectPath path;
  path.times_t.reserve(n_steps + 1);
  path.xi_a.reserve(n_steps + 1);
  path.xi_b.reserve(n_steps + 1);

  double xa = cfg.xa0, xb = cfg.xb0, t = 0.0;
  path.times_t.push_back(0.0);
  path.xi_a.push_back(xa);
  path.xi_b.push_back(xb);
  const double sqrt_dt = std::sqrt(cfg.dt_t);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double dt = std::min(cfg.dt_t, cfg.horizon_t - t);
    const double scale = (dt == cfg.dt_t) ? sqrt_dt : std::sqrt(dt);
    if (xa > 0.0) {
      const double dwa = scale * cfg.diffusion_scale * rng.normal();
      xa = xa + (cfg.b * xa - cfg.c * xa * xb) * dt + std::sqrt(xa) * dwa;
      xa = std::max(xa, 0.0);
    }
    if (xb > 0.0) {
      const double dwb = scale * cfg.diffusion_scale * rng.normal();
      xb = xb + (-cfg.c * xb * path.xi_a[k]) * dt + std::sqrt(xb) * dwb;
      xb = std::max(xb, 0.0);
    }
    t += dt;
    path.times_t.push_back(t);
    path.xi_a.push_back(xa);
    path.xi_b.push_back(xb);
  }
  return path;
}

void time_change(MassPath& path) {
  if (path.times_s.size() != path.zeta.size() || path.times_s.empty())
    throw std::invalid_argument("time_change: malformed mass path");
  path.times_t.assign(path.times_s.size(), 0.0);
  for (std::size_t k = 1; k < path.times_s.size(); ++k) {
    const double ds = path.times_s[k] - path.times_s[k - 1];
    if (ds < 0.0) throw std::invalid_argument("time_change: times_s not increasing");
    path.times_t[k] = path.times_t[k - 1] + 0.5 * (path.zeta[k] + path.zeta[k - 1]) * ds;
  }
}

double invert_time(const MassPath& path, double t) {
  if (path.times_t.size() != path.times_s.size() || path.times_t.empty())
    throw std::invalid_argument("invert_time: run time_change first");
  if (t < 0.0 || t > path.times_t.back())
    throw std::out_of_range("invert_time: t beyond horizon");
  const auto it = std::lower_bound(path.times_t.begin(), path.times_t.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - path.times_t.begin());
  if (hi == 0) return path.times_s.front();
  const double t0 = path.times_t[hi - 1], t1 = path.times_t[hi];
  const double s0 = path.times_s[hi - 1], s1 = path.times_s[hi];
  if (t1 == t0) return s0;
  return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
}

}  // namespace ldsim
