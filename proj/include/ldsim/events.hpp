#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "ldsim/rng.hpp"

namespace ldsim {

enum class Mark : std::uint8_t { beta = 0, delta = 1, lambda = 2 };

const char* mark_name(Mark m);

struct MarkSet {
  bool beta = false;
  bool delta = false;
  bool lambda = false;

  static MarkSet beta_delta() { return {true, true, false}; }
  static MarkSet all() { return {true, true, true}; }
  bool contains(Mark m) const {
    switch (m) {
      case Mark::beta: return beta;
      case Mark::delta: return delta;
      case Mark::lambda: return lambda;
    }
    return false;
  }
  int count() const { return int(beta) + int(delta) + int(lambda); }
};

enum class AtomKind : std::uint8_t { neutral = 0, potential = 1 };

// One atom of the driving point processes, tagged by kind.  Neutral atoms
// carry the arrow (src -> dst), src < dst; potential atoms carry the level,
// the activation level z in [0, cap_c], the sampling seed w in [0,1], and
// the mark.  Levels are 0-based in code; file output is 1-based.
struct EventAtom {
  double time_s = 0.0;
  AtomKind kind = AtomKind::neutral;
  int src = 0;
  int dst = 0;
  int level = 0;
  Mark mark = Mark::beta;
  double z = 0.0;
  double w = 0.0;
  std::uint64_t seq = 0;  // generation index within its stream

  bool operator==(const EventAtom&) const = default;
};

// Deterministic total order: (time, kind, i, j/level, mark, seq).  Ties in
// time across streams are broken by the stream identity, ties within one
// stream (possible only if an inter-arrival underflows to zero) by seq.
bool atom_before(const EventAtom& a, const EventAtom& b);

struct EventStream {
  int n_levels = 0;
  double horizon_s = 0.0;
  double cap_c = 0.0;
  std::vector<EventAtom> atoms;
};

// Rate-1 Poisson processes L_{ij}, one per ordered pair i < j < n_levels,
// materialized on [0, horizon] and merged into one sorted stream.
EventStream gen_neutral_events(int n_levels, double horizon_s, std::uint64_t seed);

// Potential-event processes K_level, one per (level, mark): Poisson of rate
// cap_c in time, z ~ U[0, cap_c], w ~ U[0,1].
EventStream gen_potential_events(int n_levels, double horizon_s, double cap_c,
                                 MarkSet marks, std::uint64_t seed);

// Union of two streams over the same levels and horizon, re-sorted under
// the canonical order.
EventStream merge_streams(const EventStream& a, const EventStream& b);

// CSV dump: kind,time_s,i,j,level,z,w,mark with empty fields where not
// applicable, sorted by time.
void write_event_csv(std::ostream& os, const EventStream& stream);

// Incremental merged view of all neutral and potential streams of one run.
// Atoms are produced one at a time in canonical order; per-stream state is
// one Rng and the next arrival, so memory stays bounded regardless of the
// horizon.  Given the same seed, the sequence equals the concatenation of
// gen_neutral_events / gen_potential_events (merged) restricted to any
// prefix in time.
class MergedEventSource {
 public:
  MergedEventSource(int n_levels, double cap_c, MarkSet marks, std::uint64_t seed);

  // Next atom if its time is <= s_max, nullptr otherwise (peek only).
  const EventAtom* peek_until(double s_max);
  EventAtom pop();

 private:
  struct StreamState {
    Rng rng;
    EventAtom next;
    double rate = 1.0;
  };

  void advance_stream(std::size_t idx);

  std::vector<StreamState> streams_;
  // Min-heap over stream indices keyed by the canonical atom order.
  std::vector<std::size_t> heap_;
  void sift_up(std::size_t pos);
  void sift_down(std::size_t pos);
  bool heap_less(std::size_t a, std::size_t b) const;
  double cap_c_;
};

}  // namespace ldsim
