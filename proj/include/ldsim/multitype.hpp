#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldsim/lookdown.hpp"

namespace ldsim {

// Finite type space with type-dependent fecundity b(h), competition kernel
// c(h,h') and mutation kernel ell(h,.).  Types are indexed by their position
// in `type_names`.
struct MultitypeModel {
  std::vector<std::string> type_names;
  std::vector<double> fecundity;                 // b(h)
  std::vector<std::vector<double>> competition;  // c(h,h')
  std::vector<std::vector<double>> mutation;     // ell(h,.), row-stochastic
  bool mutation_enabled = false;

  int num_types() const { return static_cast<int>(type_names.size()); }
  bool has_lambda() const { return mutation_enabled; }
  MarkSet marks() const { return mutation_enabled ? MarkSet::all() : MarkSet::beta_delta(); }

  // Rate cap dominating every activation threshold while zeta stays in
  // (1/M, M); with mutation on, the lambda threshold is zeta itself, so the
  // cap must also dominate M.
  double rate_cap(double M) const;

  void validate() const;

  // int b dmu over the empirical type law given by counts.
  double mean_fecundity(std::span<const int> counts, int n) const {
    double sum = 0.0;
    for (int h = 0; h < num_types(); ++h)
      sum += (counts[h] / static_cast<double>(n)) * fecundity[h];
    return sum;
  }
  // c(h, mu) = int c(h,h') dmu(h').
  double competition_pressure(int h, std::span<const int> counts, int n) const {
    double sum = 0.0;
    for (int k = 0; k < num_types(); ++k)
      sum += (counts[k] / static_cast<double>(n)) * competition[h][k];
    return sum;
  }

  double drift(double v, std::span<const int> counts, int n) const {
    double mean_c = 0.0;
    for (int h = 0; h < num_types(); ++h)
      mean_c += (counts[h] / static_cast<double>(n)) * competition_pressure(h, counts, n);
    return v * mean_fecundity(counts, n) - v * v * mean_c;
  }
  double beta_threshold(double v, std::span<const int> counts, int n) const {
    return mean_fecundity(counts, n) * v;
  }
  double delta_threshold(int h, double v, std::span<const int> counts, int n) const {
    return competition_pressure(h, counts, n) * (v * v);
  }
  double beta_weight(int type) const { return fecundity[type]; }
  int lambda_draw(int h, double w) const;

  // The prototype embedding: types {A, B} with b(A)=b, b(B)=0 and symmetric
  // cross competition c, no mutation.
  static MultitypeModel two_type_embedding(double b, double c);
};

// Generalized update rule for a potential atom at a level of type h, given
// the full type vector, the mass v and the atom marks (z, w, mark):
//   beta:   size-biased parent draw by fecundity if z <= v * int b dmu
//   delta:  uniform parent draw              if z <= c(h, mu) v^2
//   lambda: mutation draw from ell(h,.)      if z <= v
// Returns the resulting type at the level (h itself on rejection).
int q_general(int h, std::span<const std::uint8_t> g, double v, double z, double w, Mark mark,
              const MultitypeModel& model);

// Total-mass drift v int b dmu - v^2 int c(.,mu) dmu for the empirical type
// law of g.
double drift_total_mass_general(double v, std::span<const std::uint8_t> g,
                                const MultitypeModel& model);

// Multitype run against lazily generated events (RunConfig::b, c are
// ignored; rates come from the model).  Mutation events change the type in
// place and leave the distance matrix untouched.
AdvanceResult advance_multitype(const RunConfig& cfg, const MultitypeModel& model,
                                std::span<const double> probe_s);

MultitypeModel multitype_model_from_json(const std::string& json_text);
std::string multitype_model_to_json(const MultitypeModel& model);

}  // namespace ldsim
