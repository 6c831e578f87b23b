#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ldsim/lookdown.hpp"
#include "ldsim/parallel.hpp"

namespace ldsim {

// C-infinity plateau window with compact support [lo, hi] inside the mass
// band (1/M, M): rises over [lo, lo+width], holds 1, falls over
// [hi-width, hi].  The transition is the smooth step
// sigma(x) = 1 / (1 + exp(1/x - 1/(1-x))).
struct BandWindow {
  double lo = 0.0;
  double hi = 1.0;
  double width = 0.1;

  // Window for the band (1/M, M) with transition width width_frac*(M - 1/M),
  // inset so the support is a compact subset of the open band.
  static BandWindow for_band(double M, double width_frac = 0.05);

  double value(double v) const;
  double d1(double v) const;
  double d2(double v) const;
};

enum class TypeFactor : std::uint8_t { one, g1_is_a, g1a_g2a };

// Product-form test function F(v, r, g) = f(v) * d(r(1,2)) * gamma(g(1), g(2))
// with analytic partial derivatives.  Linear combinations are test
// functions again, so evaluation goes through this interface.
class ITestFunction {
 public:
  virtual ~ITestFunction() = default;
  virtual const std::string& id() const = 0;
  virtual int degree() const = 0;  // highest coordinate used, 1 or 2
  virtual double value(double v, double r12, int g1, int g2) const = 0;
  virtual double dv(double v, double r12, int g1, int g2) const = 0;
  virtual double dvv(double v, double r12, int g1, int g2) const = 0;
  virtual double dr12(double v, double r12, int g1, int g2) const = 0;
  // True when the value and both v-derivatives vanish at v.
  virtual bool vanishes_at(double v) const = 0;
};

class ProductTestFunction final : public ITestFunction {
 public:
  ProductTestFunction(std::string id, BandWindow window, int v_power, bool uses_r12,
                      double r_scale, TypeFactor type_factor);

  const std::string& id() const override { return id_; }
  int degree() const override;
  double value(double v, double r12, int g1, int g2) const override;
  double dv(double v, double r12, int g1, int g2) const override;
  double dvv(double v, double r12, int g1, int g2) const override;
  double dr12(double v, double r12, int g1, int g2) const override;
  bool vanishes_at(double v) const override;

  double mass(double v) const;
  double mass_d1(double v) const;
  double mass_d2(double v) const;
  double dist(double r12) const;
  double dist_d1(double r12) const;
  double type_value(int g1, int g2) const;

 private:
  std::string id_;
  BandWindow window_;
  int v_power_;
  bool uses_r12_;
  double r_scale_;
  TypeFactor type_factor_;
};

class ConstantTestFunction final : public ITestFunction {
 public:
  explicit ConstantTestFunction(double value, std::string id = "constant")
      : id_(std::move(id)), value_(value) {}
  const std::string& id() const override { return id_; }
  int degree() const override { return 1; }
  double value(double, double, int, int) const override { return value_; }
  double dv(double, double, int, int) const override { return 0.0; }
  double dvv(double, double, int, int) const override { return 0.0; }
  double dr12(double, double, int, int) const override { return 0.0; }
  bool vanishes_at(double) const override { return value_ == 0.0; }

 private:
  std::string id_;
  double value_;
};

class LinearCombination final : public ITestFunction {
 public:
  LinearCombination(std::string id,
                    std::vector<std::pair<double, const ITestFunction*>> terms);
  const std::string& id() const override { return id_; }
  int degree() const override;
  double value(double v, double r12, int g1, int g2) const override;
  double dv(double v, double r12, int g1, int g2) const override;
  double dvv(double v, double r12, int g1, int g2) const override;
  double dr12(double v, double r12, int g1, int g2) const override;
  bool vanishes_at(double v) const override;

 private:
  std::string id_;
  std::vector<std::pair<double, const ITestFunction*>> terms_;
};

// Built-in library: windowed monomials in v, a soft-capped distance factor
// tanh(r(1,2)/scale), and type indicators, degrees 1 and 2.
ProductTestFunction make_bump_v(double M, int power = 1);
ProductTestFunction make_bump_softcap_r12(double M, double r_scale = 1.0);
ProductTestFunction make_bump_indicator_a(double M);
ProductTestFunction make_bump_indicator_aa(double M);

// Generator of the stopped (zeta, R, G) dynamics applied to F at the given
// state, with the sampling integrals replaced by exact averages over the n
// levels (type-A levels for the fecundity term).  `slots` maps F's two
// coordinates to levels of the state.
double eval_generator(const ITestFunction& f, const LookdownState& state, double b, double c,
                      std::array<int, 2> slots = {0, 1});

struct ResidualReport {
  std::string function_id;
  double delta_s = 0.0;
  int replicas = 0;
  double mean = 0.0;
  double se = 0.0;
  bool pass = false;  // |mean| <= 3 se
};

// Monte Carlo estimate of E[F(X_delta) - F(X_0) - int_0^delta A F(X_u) du]
// over independent runs of the two-type engine, integral taken at the
// left point of every integration segment.
ResidualReport martingale_residual(const RunConfig& cfg, const ITestFunction& f, double delta_s,
                                   int replicas, Exec exec = Exec::serial);

std::string residual_report_json(const ResidualReport& report);

struct SymmetrizedEstimate {
  double phi = 0.0;   // mean of F over level resamples
  double aphi = 0.0;  // mean of (1/v) A F over level resamples
};

// Finite-level surrogate of the symmetrized pair (Phi_F, A Phi_F): each
// state is resampled k_samples times at F's degree, F and (1/v) A F are
// averaged over the draws.
SymmetrizedEstimate eval_symmetrized(const ITestFunction& f,
                                     const std::vector<LookdownState>& states, int k_samples,
                                     double b, double c, std::uint64_t seed);

}  // namespace ldsim
