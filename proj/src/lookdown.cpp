#include "ldsim/lookdown.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldsim/engine.hpp"

namespace ldsim {

const char* stop_name(StopStatus s) {
  switch (s) {
    case StopStatus::none: return "none";
    case StopStatus::hit_lower: return "hit_lower";
    case StopStatus::hit_upper: return "hit_upper";
  }
  return "?";
}

GrowingDistanceMatrix::GrowingDistanceMatrix(int n)
    : n_(n), store_(static_cast<std::size_t>(n) * n, 0.0), slot_(n) {
  if (n < 1) throw std::invalid_argument("distance matrix: need n >= 1");
  for (int i = 0; i < n; ++i) slot_[i] = i;
}

GrowingDistanceMatrix::GrowingDistanceMatrix(int n, std::span<const double> dense)
    : GrowingDistanceMatrix(n) {
  if (dense.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("distance matrix: dense size mismatch");
  for (int a = 0; a < n; ++a) {
    if (dense[std::size_t(a) * n + a] != 0.0)
      throw std::invalid_argument("distance matrix: nonzero diagonal");
    for (int b = 0; b < n; ++b) {
      const double v = dense[std::size_t(a) * n + b];
      if (v < 0.0) throw std::invalid_argument("distance matrix: negative entry");
      if (v != dense[std::size_t(b) * n + a])
        throw std::invalid_argument("distance matrix: asymmetric input");
      store_[std::size_t(a) * n + b] = v;
    }
  }
}

void GrowingDistanceMatrix::neutral_update(int i, int j) {
  const int parent_slot = slot_[i];
  const int recycled = slot_[n_ - 1];
  for (int l = n_ - 1; l > j; --l) slot_[l] = slot_[l - 1];
  slot_[j] = recycled;
  double* rec_row = &store_[std::size_t(recycled) * n_];
  const double* par_row = &store_[std::size_t(parent_slot) * n_];
  for (int s = 0; s < n_; ++s) {
    const double v = par_row[s];
    rec_row[s] = v;
    store_[std::size_t(s) * n_ + recycled] = v;
  }
  rec_row[parent_slot] = -growth_;
  store_[std::size_t(parent_slot) * n_ + recycled] = -growth_;
  rec_row[recycled] = 0.0;
}

void GrowingDistanceMatrix::replace(int level, int parent) {
  if (level == parent) return;
  const int ls = slot_[level];
  const int ps = slot_[parent];
  double* lrow = &store_[std::size_t(ls) * n_];
  const double* prow = &store_[std::size_t(ps) * n_];
  for (int s = 0; s < n_; ++s) {
    const double v = prow[s];
    lrow[s] = v;
    store_[std::size_t(s) * n_ + ls] = v;
  }
  lrow[ps] = -growth_;
  store_[std::size_t(ps) * n_ + ls] = -growth_;
  lrow[ls] = 0.0;
}

std::vector<double> GrowingDistanceMatrix::dense() const {
  std::vector<double> out(static_cast<std::size_t>(n_) * n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) out[std::size_t(a) * n_ + b] = at(a, b);
  return out;
}

double GrowingDistanceMatrix::max_entry() const {
  double m = 0.0;
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b) m = std::max(m, at(a, b));
  return m;
}

LookdownState::LookdownState(int n, int num_types) : r(n), types(n, 0), type_counts(num_types, 0) {
  type_counts[0] = n;
}

void LookdownState::set_types(std::span<const std::uint8_t> g) {
  if (g.size() != types.size()) throw std::invalid_argument("set_types: size mismatch");
  std::fill(type_counts.begin(), type_counts.end(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] >= type_counts.size()) throw std::invalid_argument("set_types: type out of range");
    types[i] = g[i];
    type_counts[g[i]]++;
  }
}

void validate_run_config(const RunConfig& cfg, int num_types) {
  if (cfg.n_levels < 1) throw std::invalid_argument("config: n_levels must be >= 1");
  if (cfg.M <= 1.0) throw std::invalid_argument("config: M must be > 1");
  if (cfg.v0 <= 1.0 / cfg.M || cfg.v0 >= cfg.M)
    throw std::invalid_argument("config: v0 must lie in (1/M, M)");
  if (cfg.dt_s <= 0.0) throw std::invalid_argument("config: dt_s must be > 0");
  if (cfg.horizon_s < 0.0) throw std::invalid_argument("config: horizon_s must be >= 0");
  if (cfg.b < 0.0 || cfg.c < 0.0) throw std::invalid_argument("config: rates must be >= 0");
  if (cfg.mu_a0 < 0.0 || cfg.mu_a0 > 1.0)
    throw std::invalid_argument("config: mu_a0 must be in [0,1]");
  if (!cfg.init_types.empty()) {
    if (static_cast<int>(cfg.init_types.size()) != cfg.n_levels)
      throw std::invalid_argument("config: init_types size mismatch");
    for (auto t : cfg.init_types)
      if (t >= num_types) throw std::invalid_argument("config: init type out of range");
  }
  if (!cfg.init_type_probs.empty()) {
    if (static_cast<int>(cfg.init_type_probs.size()) != num_types)
      throw std::invalid_argument("config: init_type_probs size mismatch");
    double sum = 0.0;
    for (double p : cfg.init_type_probs) {
      if (p < 0.0) throw std::invalid_argument("config: negative type probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("config: init_type_probs must sum to 1");
  }
  if (!cfg.init_r.empty() &&
      cfg.init_r.size() != static_cast<std::size_t>(cfg.n_levels) * cfg.n_levels)
    throw std::invalid_argument("config: init_r size mismatch");
  for (const auto& [a, b] : cfg.track_pairs)
    if (a < 0 || b < 0 || a >= cfg.n_levels || b >= cfg.n_levels)
      throw std::invalid_argument("config: track pair out of range");
}

void apply_neutral_event(LookdownState& state, int i, int j) {
  const int n = state.n();
  if (i < 0 || j <= i || j >= n)
    throw std::invalid_argument("apply_neutral_event: need 0 <= i < j < n");
  if (state.stop != StopStatus::none)
    throw std::logic_error("apply_neutral_event: state is stopped");
  state.r.neutral_update(i, j);
  const std::uint8_t dropped = state.types[n - 1];
  for (int l = n - 1; l > j; --l) state.types[l] = state.types[l - 1];
  state.types[j] = state.types[i];
  state.type_counts[dropped]--;
  state.type_counts[state.types[i]]++;
}

bool activation_check(const LookdownState& state, const EventAtom& atom, double b, double c) {
  if (atom.kind != AtomKind::potential)
    throw std::invalid_argument("activation_check: potential atom required");
  if (atom.level >= state.n())
    throw std::invalid_argument("activation_check: level beyond state");
  const TwoTypeModel model{b, c};
  double thr = 0.0;
  switch (atom.mark) {
    case Mark::beta:
      thr = model.beta_threshold(state.zeta, state.type_counts, state.n());
      break;
    case Mark::delta:
      thr = model.delta_threshold(state.types[atom.level], state.zeta, state.type_counts,
                                  state.n());
      break;
    case Mark::lambda:
      return false;
  }
  return atom.z <= thr && thr > 0.0;
}

int sample_individual(const LookdownState& state, double w, bool condition_on_a) {
  if (w < 0.0 || w > 1.0) throw std::invalid_argument("sample_individual: w must be in [0,1]");
  if (condition_on_a) {
    if (state.type_counts[TwoTypeModel::kA] == 0)
      throw std::logic_error("sample_individual: no type-A level to sample");
    return quantile_level(state.n(), w,
                          [&](int k) { return state.types[k] == TwoTypeModel::kA ? 1.0 : 0.0; });
  }
  return quantile_level(state.n(), w, [](int) { return 1.0; });
}

PotentialOutcome apply_potential_event(LookdownState& state, const EventAtom& atom, double b,
                                       double c) {
  if (state.stop != StopStatus::none)
    throw std::logic_error("apply_potential_event: state is stopped");
  PotentialOutcome out;
  out.active = activation_check(state, atom, b, c);
  if (!out.active) return out;
  out.parent = sample_individual(state, atom.w, atom.mark == Mark::beta);
  state.r.replace(atom.level, out.parent);
  const std::uint8_t new_type = state.types[out.parent];
  state.type_counts[state.types[atom.level]]--;
  state.types[atom.level] = new_type;
  state.type_counts[new_type]++;
  return out;
}

void grow_distances(LookdownState& state, double dt_s) {
  if (dt_s < 0.0) throw std::invalid_argument("grow_distances: dt_s must be >= 0");
  state.r.grow(2.0 * state.zeta * dt_s);
  state.t_accum += state.zeta * dt_s;
}

std::pair<double, double> project_masses(const LookdownState& state) {
  const double mu = state.mu_a();
  return {state.zeta * mu, state.zeta * (1.0 - mu)};
}

AdvanceResult advance(const RunConfig& cfg, const EventStream& events,
                      std::span<const double> probe_s) {
  Engine<TwoTypeModel> engine(cfg, TwoTypeModel{cfg.b, cfg.c}, events);
  engine.run(probe_s);
  return {engine.snapshots(), engine.state()};
}

}  // namespace ldsim
