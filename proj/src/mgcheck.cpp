#include "ldsim/mgcheck.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ldsim/engine.hpp"
#include "ldsim/rng.hpp"
#include "ldsim/stats.hpp"

namespace ldsim {

namespace {

double eval_state_value(const ITestFunction& f, const LookdownState& st) {
  const int deg = f.degree();
  const double r12 = deg == 2 ? st.r.at(0, 1) : 0.0;
  return f.value(st.zeta, r12, st.types[0], deg == 2 ? st.types[1] : 0);
}

// Smooth step on (0,1) and its first two derivatives.
struct SmoothStep {
  double s, d1, d2;
};

SmoothStep smooth_step(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  if (x >= 1.0) return {1.0, 0.0, 0.0};
  const double g = 1.0 / x - 1.0 / (1.0 - x);
  const double g1 = -1.0 / (x * x) - 1.0 / ((1.0 - x) * (1.0 - x));
  const double g2 = 2.0 / (x * x * x) - 2.0 / ((1.0 - x) * (1.0 - x) * (1.0 - x));
  const double e = std::exp(g);
  if (!std::isfinite(e)) return {0.0, 0.0, 0.0};
  const double s = 1.0 / (1.0 + e);
  const double d1 = -s * (1.0 - s) * g1;
  const double d2 = -d1 * (1.0 - 2.0 * s) * g1 - s * (1.0 - s) * g2;
  return {s, d1, d2};
}

}  // namespace

BandWindow BandWindow::for_band(double M, double width_frac) {
  if (M <= 1.0) throw std::invalid_argument("BandWindow: M must be > 1");
  const double span = M - 1.0 / M;
  BandWindow w;
  w.width = width_frac * span;
  w.lo = 1.0 / M + 0.5 * w.width;
  w.hi = M - 0.5 * w.width;
  if (w.hi - w.lo <= 2.0 * w.width)
    throw std::invalid_argument("BandWindow: width too large for the band");
  return w;
}

double BandWindow::value(double v) const {
  if (v <= lo || v >= hi) return 0.0;
  if (v < lo + width) return smooth_step((v - lo) / width).s;
  if (v > hi - width) return smooth_step((hi - v) / width).s;
  return 1.0;
}

double BandWindow::d1(double v) const {
  if (v <= lo || v >= hi) return 0.0;
  if (v < lo + width) return smooth_step((v - lo) / width).d1 / width;
  if (v > hi - width) return -smooth_step((hi - v) / width).d1 / width;
  return 0.0;
}

double BandWindow::d2(double v) const {
  if (v <= lo || v >= hi) return 0.0;
  if (v < lo + width) return smooth_step((v - lo) / width).d2 / (width * width);
  if (v > hi - width) return smooth_step((hi - v) / width).d2 / (width * width);
  return 0.0;
}

ProductTestFunction::ProductTestFunction(std::string id, BandWindow window, int v_power,
                                         bool uses_r12, double r_scale, TypeFactor type_factor)
    : id_(std::move(id)),
      window_(window),
      v_power_(v_power),
      uses_r12_(uses_r12),
      r_scale_(r_scale),
      type_factor_(type_factor) {
  if (v_power < 0 || v_power > 3)
    throw std::invalid_argument("ProductTestFunction: v_power out of range");
  if (r_scale <= 0.0) throw std::invalid_argument("ProductTestFunction: r_scale must be > 0");
}

int ProductTestFunction::degree() const {
  return (uses_r12_ || type_factor_ == TypeFactor::g1a_g2a) ? 2 : 1;
}

double ProductTestFunction::mass(double v) const {
  return window_.value(v) * std::pow(v, v_power_);
}

double ProductTestFunction::mass_d1(double v) const {
  const double p = static_cast<double>(v_power_);
  double out = window_.d1(v) * std::pow(v, v_power_);
  if (v_power_ > 0) out += window_.value(v) * p * std::pow(v, v_power_ - 1);
  return out;
}

double ProductTestFunction::mass_d2(double v) const {
  const double p = static_cast<double>(v_power_);
  double out = window_.d2(v) * std::pow(v, v_power_);
  if (v_power_ > 0) out += 2.0 * window_.d1(v) * p * std::pow(v, v_power_ - 1);
  if (v_power_ > 1) out += window_.value(v) * p * (p - 1.0) * std::pow(v, v_power_ - 2);
  return out;
}

double ProductTestFunction::dist(double r12) const {
  return uses_r12_ ? std::tanh(r12 / r_scale_) : 1.0;
}

double ProductTestFunction::dist_d1(double r12) const {
  if (!uses_r12_) return 0.0;
  const double t = std::tanh(r12 / r_scale_);
  return (1.0 - t * t) / r_scale_;
}

double ProductTestFunction::type_value(int g1, int g2) const {
  switch (type_factor_) {
    case TypeFactor::one: return 1.0;
    case TypeFactor::g1_is_a: return g1 == TwoTypeModel::kA ? 1.0 : 0.0;
    case TypeFactor::g1a_g2a:
      return (g1 == TwoTypeModel::kA && g2 == TwoTypeModel::kA) ? 1.0 : 0.0;
  }
  return 1.0;
}

double ProductTestFunction::value(double v, double r12, int g1, int g2) const {
  return mass(v) * dist(r12) * type_value(g1, g2);
}
double ProductTestFunction::dv(double v, double r12, int g1, int g2) const {
  return mass_d1(v) * dist(r12) * type_value(g1, g2);
}
double ProductTestFunction::dvv(double v, double r12, int g1, int g2) const {
  return mass_d2(v) * dist(r12) * type_value(g1, g2);
}
double ProductTestFunction::dr12(double v, double r12, int g1, int g2) const {
  return mass(v) * dist_d1(r12) * type_value(g1, g2);
}
bool ProductTestFunction::vanishes_at(double v) const {
  return mass(v) == 0.0 && mass_d1(v) == 0.0 && mass_d2(v) == 0.0;
}

LinearCombination::LinearCombination(std::string id,
                                     std::vector<std::pair<double, const ITestFunction*>> terms)
    : id_(std::move(id)), terms_(std::move(terms)) {}

int LinearCombination::degree() const {
  int d = 1;
  for (const auto& [coef, f] : terms_) d = std::max(d, f->degree());
  return d;
}
double LinearCombination::value(double v, double r12, int g1, int g2) const {
  double out = 0.0;
  for (const auto& [coef, f] : terms_) out += coef * f->value(v, r12, g1, g2);
  return out;
}
double LinearCombination::dv(double v, double r12, int g1, int g2) const {
  double out = 0.0;
  for (const auto& [coef, f] : terms_) out += coef * f->dv(v, r12, g1, g2);
  return out;
}
double LinearCombination::dvv(double v, double r12, int g1, int g2) const {
  double out = 0.0;
  for (const auto& [coef, f] : terms_) out += coef * f->dvv(v, r12, g1, g2);
  return out;
}
double LinearCombination::dr12(double v, double r12, int g1, int g2) const {
  double out = 0.0;
  for (const auto& [coef, f] : terms_) out += coef * f->dr12(v, r12, g1, g2);
  return out;
}
bool LinearCombination::vanishes_at(double v) const {
  for (const auto& [coef, f] : terms_)
    if (!f->vanishes_at(v)) return false;
  return true;
}

ProductTestFunction make_bump_v(double M, int power) {
  return ProductTestFunction("bump_v" + std::to_string(power), BandWindow::for_band(M), power,
                             false, 1.0, TypeFactor::one);
}
ProductTestFunction make_bump_softcap_r12(double M, double r_scale) {
  return ProductTestFunction("bump_softcap_r12", BandWindow::for_band(M), 0, true, r_scale,
                             TypeFactor::one);
}
ProductTestFunction make_bump_indicator_a(double M) {
  return ProductTestFunction("bump_ind_a", BandWindow::for_band(M), 0, false, 1.0,
                             TypeFactor::g1_is_a);
}
ProductTestFunction make_bump_indicator_aa(double M) {
  return ProductTestFunction("bump_ind_a1a2", BandWindow::for_band(M), 0, false, 1.0,
                             TypeFactor::g1a_g2a);
}

double eval_generator(const ITestFunction& f, const LookdownState& state, double b, double c,
                      std::array<int, 2> slots) {
  const int deg = f.degree();
  const int n = state.n();
  if (deg > n) throw std::invalid_argument("eval_generator: degree exceeds state size");
  for (int a = 0; a < deg; ++a)
    if (slots[a] < 0 || slots[a] >= n)
      throw std::invalid_argument("eval_generator: slot out of range");

  const double v = state.zeta;
  if (f.vanishes_at(v)) return 0.0;  // compact support: zero off the band

  const int l0 = slots[0];
  const int l1 = deg == 2 ? slots[1] : slots[0];
  const double r12 = deg == 2 ? state.r.at(l0, l1) : 0.0;
  const int g1 = state.types[l0];
  const int g2 = deg == 2 ? state.types[l1] : 0;
  const double mu_a = state.mu_a();
  const double mu_b = state.mu_b();

  const double f_base = f.value(v, r12, g1, g2);
  double total = 0.5 * v * v * f.dvv(v, r12, g1, g2);
  total += (b * v * v * mu_a - 2.0 * c * v * v * v * mu_a * mu_b) * f.dv(v, r12, g1, g2);
  if (deg == 2) {
    total += 2.0 * v * f.dr12(v, r12, g1, g2);
    // One neutral arrow (1 -> 2) acts inside the degree: the daughter of
    // slot 1 replaces slot 2 at distance zero.
    total += f.value(v, 0.0, g1, g1) - f_base;
  }

  // Competitive death at slot a, parent averaged over all levels.
  for (int a = 0; a < deg; ++a) {
    const int ga = a == 0 ? g1 : g2;
    const double coeff =
        c * v * v * (ga == TwoTypeModel::kB ? mu_a : mu_b);
    if (coeff == 0.0) continue;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const int parent_type = state.types[k];
      double r_new = r12;
      if (deg == 2) r_new = a == 0 ? state.r.at(k, l1) : state.r.at(l0, k);
      const int g1_new = a == 0 ? parent_type : g1;
      const int g2_new = a == 1 ? parent_type : g2;
      sum += f.value(v, r_new, g1_new, g2_new) - f_base;
    }
    total += coeff * sum / static_cast<double>(n);
  }

  // Selective birth at slot a, parent averaged over type-A levels.
  if (b > 0.0) {
    for (int a = 0; a < deg; ++a) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) {
        if (state.types[k] != TwoTypeModel::kA) continue;
        double r_new = r12;
        if (deg == 2) r_new = a == 0 ? state.r.at(k, l1) : state.r.at(l0, k);
        const int g1_new = a == 0 ? TwoTypeModel::kA : g1;
        const int g2_new = a == 1 ? TwoTypeModel::kA : g2;
        sum += f.value(v, r_new, g1_new, g2_new) - f_base;
      }
      total += b * v * sum / static_cast<double>(n);
    }
  }
  return total;
}

ResidualReport martingale_residual(const RunConfig& cfg, const ITestFunction& f, double delta_s,
                                   int replicas, Exec exec) {
  if (delta_s <= 0.0) throw std::invalid_argument("martingale_residual: delta_s must be > 0");
  if (replicas < 2) throw std::invalid_argument("martingale_residual: need >= 2 replicas");
  if (cfg.horizon_s < delta_s)
    throw std::invalid_argument("martingale_residual: horizon shorter than delta_s");

  std::vector<double> residuals(replicas, 0.0);
  parallel_for(static_cast<std::size_t>(replicas), exec, [&](std::size_t rep) {
    RunConfig rcfg = cfg;
    rcfg.seed = derive_seed(cfg.seed, seed_tag::kReplica, rep);
    rcfg.horizon_s = delta_s;
    Engine<TwoTypeModel> engine(rcfg, TwoTypeModel{cfg.b, cfg.c});
    double integral = 0.0;
    EngineHooks hooks;
    hooks.on_substep = [&](const LookdownState& st, double ds) {
      integral += eval_generator(f, st, cfg.b, cfg.c) * ds;
    };
    const double f0 = eval_state_value(f, engine.state());
    engine.run({}, &hooks);
    const double f1 = eval_state_value(f, engine.state());
    residuals[rep] = f1 - f0 - integral;
  });

  Accumulator acc;
  for (double r : residuals) acc.add(r);
  ResidualReport report;
  report.function_id = f.id();
  report.delta_s = delta_s;
  report.replicas = replicas;
  report.mean = acc.mean();
  report.se = acc.standard_error();
  report.pass = std::abs(report.mean) <= 3.0 * report.se;
  return report;
}

std::string residual_report_json(const ResidualReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "{\"function_id\":\"%s\",\"delta\":%.17g,\"replicas\":%d,\"mean\":%.17g,"
                "\"se\":%.17g,\"pass\":%s}",
                r.function_id.c_str(), r.delta_s, r.replicas, r.mean, r.se,
                r.pass ? "true" : "false");
  return buf;
}

SymmetrizedEstimate eval_symmetrized(const ITestFunction& f,
                                     const std::vector<LookdownState>& states, int k_samples,
                                     double b, double c, std::uint64_t seed) {
  if (k_samples < 1) throw std::invalid_argument("eval_symmetrized: k_samples must be >= 1");
  if (states.empty()) throw std::invalid_argument("eval_symmetrized: empty ensemble");
  const int deg = f.degree();
  Accumulator phi, aphi;
  for (std::size_t si = 0; si < states.size(); ++si) {
    const LookdownState& st = states[si];
    const int n = st.n();
    if (deg > n) throw std::invalid_argument("eval_symmetrized: degree exceeds state size");
    Rng rng(derive_seed(seed, seed_tag::kResample, si));
    for (int m = 0; m < k_samples; ++m) {
      std::array<int, 2> slots{0, 0};
      slots[0] = static_cast<int>(rng.below(n));
      if (deg == 2) {
        int second = static_cast<int>(rng.below(n - 1));
        if (second >= slots[0]) ++second;
        slots[1] = second;
      }
      const double r12 = deg == 2 ? st.r.at(slots[0], slots[1]) : 0.0;
      phi.add(f.value(st.zeta, r12, st.types[slots[0]],
                      deg == 2 ? st.types[slots[1]] : 0));
      aphi.add(eval_generator(f, st, b, c, slots) / st.zeta);
    }
  }
  return {phi.mean(), aphi.mean()};
}

}  // namespace ldsim
