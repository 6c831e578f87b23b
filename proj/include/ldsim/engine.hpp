#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

#include "ldsim/events.hpp"
#include "ldsim/lookdown.hpp"
#include "ldsim/rng.hpp"

namespace ldsim {

// Event supply for one run, either generated on the fly or replayed from a
// materialized stream.
class IEventFeed {
 public:
  virtual ~IEventFeed() = default;
  virtual const EventAtom* peek_until(double s_max) = 0;
  virtual EventAtom pop() = 0;
};

class LazyEventFeed final : public IEventFeed {
 public:
  LazyEventFeed(int n_levels, double cap_c, MarkSet marks, std::uint64_t seed)
      : source_(n_levels, cap_c, marks, seed) {}
  const EventAtom* peek_until(double s_max) override { return source_.peek_until(s_max); }
  EventAtom pop() override { return source_.pop(); }

 private:
  MergedEventSource source_;
};

class ReplayEventFeed final : public IEventFeed {
 public:
  explicit ReplayEventFeed(const EventStream& stream) : stream_(&stream) {}
  const EventAtom* peek_until(double s_max) override {
    if (pos_ >= stream_->atoms.size()) return nullptr;
    const EventAtom& a = stream_->atoms[pos_];
    return a.time_s <= s_max ? &a : nullptr;
  }
  EventAtom pop() override { return stream_->atoms[pos_++]; }

 private:
  const EventStream* stream_;
  std::size_t pos_ = 0;
};

struct EngineHooks {
  // After every applied event (all neutral arrows, activated potentials).
  // parent is the sampled level for beta/delta, -1 for lambda and neutral.
  std::function<void(const LookdownState&, const EventAtom&, int parent)> on_applied_event;
  // Before each mass-integration segment, with the left-limit state.
  std::function<void(const LookdownState&, double ds)> on_substep;
  // At every recorded probe, with the full state.
  std::function<void(const LookdownState&)> on_probe;
};

// Event-driven integrator of the (zeta, R, G) system.  Between atoms the
// mass follows the exponential-Euler log dynamics with the drift refined at
// event times; the Brownian increment of each fixed grid cell [k dt, (k+1) dt)
// is drawn from a cell-tagged substream and applied at the cell boundary,
// so runs at different level counts consume identical noise.  Activation
// thresholds therefore always see the left limit of the state at the atom
// time.  The run halts the first time zeta leaves (1/M, M).
template <class Model>
class Engine {
 public:
  Engine(const RunConfig& cfg, Model model)
      : cfg_(cfg), model_(std::move(model)), state_(cfg.n_levels, model_.num_types()) {
    validate_run_config(cfg_, model_.num_types());
    init_state();
    feed_ = std::make_unique<LazyEventFeed>(cfg_.n_levels, model_.rate_cap(cfg_.M),
                                            model_.marks(), cfg_.seed);
  }

  Engine(const RunConfig& cfg, Model model, const EventStream& events)
      : cfg_(cfg), model_(std::move(model)), state_(cfg.n_levels, model_.num_types()) {
    validate_run_config(cfg_, model_.num_types());
    if (events.n_levels != cfg_.n_levels)
      throw std::invalid_argument("engine: event stream level count mismatch");
    if (events.horizon_s < cfg_.horizon_s)
      throw std::invalid_argument("engine: event stream horizon shorter than run horizon");
    if (model_.rate_cap(cfg_.M) > 0.0 && events.cap_c < model_.rate_cap(cfg_.M))
      throw std::invalid_argument("engine: event stream cap_c below the run's rate cap");
    init_state();
    feed_ = std::make_unique<ReplayEventFeed>(events);
  }

  const LookdownState& state() const { return state_; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const Model& model() const { return model_; }

  // Advances to the s-horizon (and optionally to the clock target t_target,
  // whichever comes first), recording snapshots at probe_s.
  void run(std::span<const double> probe_s = {}, EngineHooks* hooks = nullptr,
           double t_target = -1.0) {
    for (std::size_t k = 0; k < probe_s.size(); ++k) {
      if (probe_s[k] < 0.0 || (k > 0 && probe_s[k] < probe_s[k - 1]))
        throw std::invalid_argument("engine: probe times must be sorted and nonnegative");
    }
    std::size_t pi = 0;
    const double s_end = cfg_.horizon_s;
    while (state_.stop == StopStatus::none && state_.s < s_end) {
      if (t_target > 0.0 && state_.t_accum >= t_target) break;
      double target = std::min(cell_end_, s_end);
      const double probe = pi < probe_s.size() ? probe_s[pi] : -1.0;
      if (probe >= 0.0) target = std::min(target, probe);

      const EventAtom* ev = feed_->peek_until(target);
      double seg_end = ev ? ev->time_s : target;
      double ds = seg_end - state_.s;
      if (t_target > 0.0) {
        const double remaining = t_target - state_.t_accum;
        const double ds_t = remaining / state_.zeta;
        if (ds_t < ds) {
          ds = ds_t;
          seg_end = state_.s + ds;
          ev = nullptr;
        }
      }
      if (ds > 0.0) {
        if (hooks && hooks->on_substep) hooks->on_substep(state_, ds);
        drift_segment(ds);
      }
      state_.s = seg_end;
      if (state_.stop != StopStatus::none) break;

      if (ev) {
        apply_atom(feed_->pop(), hooks);
        continue;
      }
      if (t_target > 0.0 && state_.t_accum >= t_target) break;
      if (state_.s == cell_end_) {
        apply_cell_noise();
        ++cell_;
        cell_end_ = cfg_.dt_s * static_cast<double>(cell_ + 1);
        if (state_.stop != StopStatus::none) break;
      }
      if (probe >= 0.0 && state_.s >= probe) {
        record_snapshot();
        if (hooks && hooks->on_probe) hooks->on_probe(state_);
        ++pi;
      }
    }
    // Stopped runs keep reporting the frozen state at later probes.
    for (; pi < probe_s.size(); ++pi) {
      record_snapshot();
      if (hooks && hooks->on_probe) hooks->on_probe(state_);
    }
  }

  void run_until_t(double t_target, EngineHooks* hooks = nullptr) {
    run({}, hooks, t_target);
  }

 private:
  void init_state() {
    state_.zeta = cfg_.v0;
    const int n = cfg_.n_levels;
    std::vector<std::uint8_t> g;
    if (!cfg_.init_types.empty()) {
      g = cfg_.init_types;
    } else {
      g.resize(n);
      Rng rng(derive_seed(cfg_.seed, seed_tag::kInitTypes));
      const int K = model_.num_types();
      for (int i = 0; i < n; ++i) {
        if (K == 2 && cfg_.init_type_probs.empty()) {
          g[i] = rng.uniform01() < cfg_.mu_a0 ? 0 : 1;
        } else {
          const double u = rng.uniform01();
          double cum = 0.0;
          std::uint8_t pick = static_cast<std::uint8_t>(K - 1);
          for (int h = 0; h < K; ++h) {
            cum += cfg_.init_type_probs.empty() ? 1.0 / K : cfg_.init_type_probs[h];
            if (u < cum) {
              pick = static_cast<std::uint8_t>(h);
              break;
            }
          }
          g[i] = pick;
        }
      }
    }
    state_.set_types(g);
    if (!cfg_.init_r.empty()) {
      state_.r = GrowingDistanceMatrix(n, cfg_.init_r);
    }
    cell_ = 0;
    cell_end_ = cfg_.dt_s;
  }

  void drift_segment(double ds) {
    const double f = model_.drift(state_.zeta, state_.type_counts, state_.n());
    const double z_new = state_.zeta * std::exp(f * ds);
    const double dt_int = 0.5 * (state_.zeta + z_new) * ds;
    state_.t_accum += dt_int;
    state_.r.grow(2.0 * dt_int);
    state_.zeta = z_new;
    check_band();
  }

  void apply_cell_noise() {
    if (cfg_.diffusion_scale == 0.0) return;
    Rng rng(derive_seed(cfg_.seed, seed_tag::kMassNoise, static_cast<std::uint64_t>(cell_)));
    const double sigma = cfg_.diffusion_scale;
    const double dw = std::sqrt(cfg_.dt_s) * rng.normal();
    state_.zeta *= std::exp(-0.5 * sigma * sigma * cfg_.dt_s + sigma * dw);
    check_band();
  }

  void check_band() {
    if (state_.zeta <= 1.0 / cfg_.M) {
      state_.stop = StopStatus::hit_lower;
    } else if (state_.zeta >= cfg_.M) {
      state_.stop = StopStatus::hit_upper;
    }
  }

  void apply_atom(const EventAtom& atom, EngineHooks* hooks) {
    if (atom.kind == AtomKind::neutral) {
      apply_neutral_event(state_, atom.src, atom.dst);
      if (hooks && hooks->on_applied_event) hooks->on_applied_event(state_, atom, atom.src);
      return;
    }
    const int level = atom.level;
    const double v = state_.zeta;
    bool active = false;
    int parent = -1;
    int new_type = -1;
    switch (atom.mark) {
      case Mark::beta: {
        const double thr = model_.beta_threshold(v, state_.type_counts, state_.n());
        active = atom.z <= thr && thr > 0.0;
        if (active) {
          parent = quantile_level(state_.n(), atom.w, [&](int k) {
            return model_.beta_weight(state_.types[k]);
          });
          new_type = state_.types[parent];
        }
        break;
      }
      case Mark::delta: {
        const double thr =
            model_.delta_threshold(state_.types[level], v, state_.type_counts, state_.n());
        active = atom.z <= thr && thr > 0.0;
        if (active) {
          parent = quantile_level(state_.n(), atom.w, [](int) { return 1.0; });
          new_type = state_.types[parent];
        }
        break;
      }
      case Mark::lambda: {
        if (!model_.has_lambda()) break;
        active = atom.z <= v;
        if (active) new_type = model_.lambda_draw(state_.types[level], atom.w);
        break;
      }
    }
    if (!active) return;
    if (parent >= 0) state_.r.replace(level, parent);
    state_.type_counts[state_.types[level]]--;
    state_.types[level] = static_cast<std::uint8_t>(new_type);
    state_.type_counts[new_type]++;
    if (hooks && hooks->on_applied_event) hooks->on_applied_event(state_, atom, parent);
  }

  void record_snapshot() {
    Snapshot snap;
    snap.s = state_.s;
    snap.t = state_.t_accum;
    snap.zeta = state_.zeta;
    snap.stop = state_.stop;
    snap.type_freqs.resize(model_.num_types());
    for (int h = 0; h < model_.num_types(); ++h) snap.type_freqs[h] = state_.type_freq(h);
    snap.tracked.reserve(cfg_.track_pairs.size());
    for (const auto& [a, b] : cfg_.track_pairs) snap.tracked.push_back(state_.r.at(a, b));
    snapshots_.push_back(std::move(snap));
  }

  RunConfig cfg_;
  Model model_;
  LookdownState state_;
  std::unique_ptr<IEventFeed> feed_;
  std::vector<Snapshot> snapshots_;
  std::int64_t cell_ = 0;
  double cell_end_ = 0.0;
};

using TwoTypeEngine = Engine<TwoTypeModel>;

}  // namespace ldsim
