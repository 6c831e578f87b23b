#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ldsim/events.hpp"
#include "ldsim/sde.hpp"

namespace ldsim {

enum class StopStatus : std::uint8_t { none = 0, hit_lower = 1, hit_upper = 2 };

const char* stop_name(StopStatus s);

// Symmetric nonnegative distance matrix with zero diagonal, specialized for
// the two update patterns of the particle system:
//
//  * uniform growth of every off-diagonal entry (distances grow at rate
//    2*zeta) is a single offset addition, and
//  * birth events (copy a row, reset one entry to zero, possibly shift
//    levels) touch O(n) entries via a level->slot indirection.
//
// Entries are stored as baselines relative to the accumulated growth, so a
// freshly reset pair reads exactly zero.
class GrowingDistanceMatrix {
 public:
  explicit GrowingDistanceMatrix(int n);
  GrowingDistanceMatrix(int n, std::span<const double> dense);

  int size() const { return n_; }
  double at(int a, int b) const {
    return a == b ? 0.0 : store_[std::size_t(slot_[a]) * n_ + slot_[b]] + growth_;
  }
  double growth() const { return growth_; }

  void grow(double amount) { growth_ += amount; }

  // Neutral arrow i -> j (i < j): insert a daughter of level i at level j,
  // shift levels >= j up by one, drop the former level n-1.
  void neutral_update(int i, int j);

  // Replace the individual at `level` by a daughter of `parent`: the new
  // individual inherits the parent's distances and sits at distance zero
  // from it.  parent == level is a no-op.
  void replace(int level, int parent);

  std::vector<double> dense() const;
  double max_entry() const;

 private:
  int n_;
  double growth_ = 0.0;
  std::vector<double> store_;  // n x n baselines, indexed by slot
  std::vector<int> slot_;      // level -> slot
};

// Quantile draw over levels 0..n-1 with nonnegative weights: the smallest
// level whose cumulative weight reaches w * total, skipping zero-weight
// levels.  With unit weights over m eligible levels this is the
// ceil(w*m)-th eligible level (w = 0 gives the first).  Requires a
// positive total weight.
template <class WeightFn>
int quantile_level(int n, double w, WeightFn&& weight) {
  double total = 0.0;
  for (int k = 0; k < n; ++k) total += weight(k);
  const double target = w * total;
  double cum = 0.0;
  int last_positive = -1;
  for (int k = 0; k < n; ++k) {
    const double wk = weight(k);
    if (wk <= 0.0) continue;
    cum += wk;
    last_positive = k;
    if (cum >= target) return k;
  }
  return last_positive;  // w at the top quantile with rounding slack
}

struct LookdownState {
  double s = 0.0;
  double zeta = 1.0;
  double t_accum = 0.0;
  StopStatus stop = StopStatus::none;
  GrowingDistanceMatrix r;
  std::vector<std::uint8_t> types;
  std::vector<int> type_counts;

  LookdownState(int n, int num_types);

  int n() const { return static_cast<int>(types.size()); }
  double type_freq(int h) const {
    return static_cast<double>(type_counts[h]) / static_cast<double>(n());
  }
  double mu_a() const { return type_freq(0); }
  double mu_b() const { return type_freq(1); }
  void set_types(std::span<const std::uint8_t> g);
};

// Two-type dynamics: type 0 is the selectively favoured type A, type 1 is
// B.  Thresholds follow the thinning rule of the potential-event processes;
// an event fires only when its activation level clears a strictly positive
// threshold.
struct TwoTypeModel {
  double b = 0.0;
  double c = 0.0;

  static constexpr int kA = 0;
  static constexpr int kB = 1;

  int num_types() const { return 2; }
  bool has_lambda() const { return false; }
  MarkSet marks() const { return MarkSet::beta_delta(); }
  double rate_cap(double M) const { return std::max(b, c) * M * M; }

  double drift(double v, std::span<const int> counts, int n) const {
    return drift_total_mass(v, counts[kA] / static_cast<double>(n), b, c);
  }
  double beta_threshold(double v, std::span<const int> counts, int n) const {
    return b * (counts[kA] / static_cast<double>(n)) * v;
  }
  double delta_threshold(int h, double v, std::span<const int> counts, int n) const {
    const double mu_opp = counts[h == kA ? kB : kA] / static_cast<double>(n);
    return c * mu_opp * (v * v);
  }
  double beta_weight(int type) const { return type == kA ? 1.0 : 0.0; }
  int lambda_draw(int h, double /*w*/) const { return h; }
};

struct RunConfig {
  int n_levels = 16;
  double b = 0.0;
  double c = 0.0;
  double M = 10.0;
  double dt_s = 1e-3;
  double horizon_s = 1.0;
  std::uint64_t seed = 1;
  double v0 = 1.0;
  std::vector<std::uint8_t> init_types;  // explicit initial types, else i.i.d.
  double mu_a0 = 0.5;                    // i.i.d. P(type = A) for the two-type engine
  std::vector<double> init_type_probs;   // i.i.d. type law for multitype engines
  std::vector<double> init_r;            // dense n x n initial distances, default zero
  double diffusion_scale = 1.0;          // 0 suppresses the mass noise (testing hook)
  std::vector<std::pair<int, int>> track_pairs;  // distance entries recorded per probe
};

void validate_run_config(const RunConfig& cfg, int num_types);

// --- state updates -------------------------------------------------------

// Neutral arrow i -> j (0-based, i < j < n): the daughter of level i is
// inserted at level j with the parent's type, levels >= j shift up, the
// former top level drops out.
void apply_neutral_event(LookdownState& state, int i, int j);

// Thinning rule for a potential atom against the current (left-limit)
// state.
bool activation_check(const LookdownState& state, const EventAtom& atom, double b, double c);

// Quantile draw of a level, over all levels or only type-A levels.
int sample_individual(const LookdownState& state, double w, bool condition_on_a);

struct PotentialOutcome {
  bool active = false;
  int parent = -1;
};

// Applies a potential atom: checks activation, samples the parent, replaces
// the type and distance row at the atom's level.
PotentialOutcome apply_potential_event(LookdownState& state, const EventAtom& atom, double b,
                                       double c);

// Distance growth over a step with the current mass held fixed:
// every off-diagonal entry gains 2 * zeta * dt, the clock gains zeta * dt.
void grow_distances(LookdownState& state, double dt_s);

// (xi_a, xi_b) = (zeta * mu_a, zeta * (1 - mu_a)).
std::pair<double, double> project_masses(const LookdownState& state);

// --- trajectories --------------------------------------------------------

struct Snapshot {
  double s = 0.0;
  double t = 0.0;
  double zeta = 0.0;
  StopStatus stop = StopStatus::none;
  std::vector<double> type_freqs;
  std::vector<double> tracked;  // distances of RunConfig::track_pairs
  double mu_a() const { return type_freqs.empty() ? 0.0 : type_freqs[0]; }
};

struct AdvanceResult {
  std::vector<Snapshot> trajectory;
  LookdownState final_state;
};

// Runs the two-type engine against a pre-materialized event stream,
// sampling the trajectory at probe_s.  The stream must cover the
// configured horizon.
AdvanceResult advance(const RunConfig& cfg, const EventStream& events,
                      std::span<const double> probe_s);

}  // namespace ldsim
