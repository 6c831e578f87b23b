#include "ldsim/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace ldsim {

const char* mark_name(Mark m) {
  switch (m) {
    case Mark::beta: return "beta";
    case Mark::delta: return "delta";
    case Mark::lambda: return "lambda";
  }
  return "?";
}

bool atom_before(const EventAtom& a, const EventAtom& b) {
  auto key = [](const EventAtom& e) {
    const int lo = e.kind == AtomKind::neutral ? e.src : e.level;
    const int hi = e.kind == AtomKind::neutral ? e.dst : static_cast<int>(e.mark);
    return std::make_tuple(e.time_s, static_cast<int>(e.kind), lo, hi, e.seq);
  };
  return key(a) < key(b);
}

namespace {

// Atoms of one stream are exponential inter-arrival sums; z and w are drawn
// with the atom, in the fixed order (gap, z, w).
EventAtom first_neutral_atom(Rng& rng, int i, int j) {
  EventAtom a;
  a.kind = AtomKind::neutral;
  a.src = i;
  a.dst = j;
  a.time_s = rng.exponential();
  a.seq = 0;
  return a;
}

EventAtom first_potential_atom(Rng& rng, int level, Mark mark, double cap_c) {
  EventAtom a;
  a.kind = AtomKind::potential;
  a.level = level;
  a.mark = mark;
  a.time_s = rng.exponential() / cap_c;
  a.z = cap_c * rng.uniform01();
  a.w = rng.uniform01();
  a.seq = 0;
  return a;
}

void advance_neutral(Rng& rng, EventAtom& a) {
  a.time_s += rng.exponential();
  ++a.seq;
}

void advance_potential(Rng& rng, EventAtom& a, double cap_c) {
  a.time_s += rng.exponential() / cap_c;
  a.z = cap_c * rng.uniform01();
  a.w = rng.uniform01();
  ++a.seq;
}

}  // namespace

EventStream gen_neutral_events(int n_levels, double horizon_s, std::uint64_t seed) {
  if (n_levels < 1) throw std::invalid_argument("gen_neutral_events: n_levels must be >= 1");
  if (horizon_s < 0) throw std::invalid_argument("gen_neutral_events: horizon must be >= 0");
  EventStream out;
  out.n_levels = n_levels;
  out.horizon_s = horizon_s;
  out.cap_c = 0.0;
  for (int i = 0; i < n_levels; ++i) {
    for (int j = i + 1; j < n_levels; ++j) {
      Rng rng(derive_seed(seed, seed_tag::kNeutralStream, std::uint64_t(i), std::uint64_t(j)));
      EventAtom a = first_neutral_atom(rng, i, j);
      while (a.time_s <= horizon_s) {
        out.atoms.push_back(a);
        advance_neutral(rng, a);
      }
    }
  }
  std::sort(out.atoms.begin(), out.atoms.end(), atom_before);
  return out;
}

EventStream gen_potential_events(int n_levels, double horizon_s, double cap_c,
                                 MarkSet marks, std::uint64_t seed) {
  if (n_levels < 1) throw std::invalid_argument("gen_potential_events: n_levels must be >= 1");
  if (horizon_s < 0) throw std::invalid_argument("gen_potential_events: horizon must be >= 0");
  if (cap_c < 0) throw std::invalid_argument("gen_potential_events: cap_c must be >= 0");
  if (marks.count() == 0) throw std::invalid_argument("gen_potential_events: empty mark set");
  EventStream out;
  out.n_levels = n_levels;
  out.horizon_s = horizon_s;
  out.cap_c = cap_c;
  if (cap_c == 0.0) return out;
  for (int level = 0; level < n_levels; ++level) {
    for (Mark mark : {Mark::beta, Mark::delta, Mark::lambda}) {
      if (!marks.contains(mark)) continue;
      Rng rng(derive_seed(seed, seed_tag::kPotentialStream, std::uint64_t(level),
                          std::uint64_t(mark)));
      EventAtom a = first_potential_atom(rng, level, mark, cap_c);
      while (a.time_s <= horizon_s) {
        out.atoms.push_back(a);
        advance_potential(rng, a, cap_c);
      }
    }
  }
  std::sort(out.atoms.begin(), out.atoms.end(), atom_before);
  return out;
}

EventStream merge_streams(const EventStream& a, const EventStream& b) {
  if (a.n_levels != b.n_levels)
    throw std::invalid_argument("merge_streams: mismatched n_levels");
  if (a.horizon_s != b.horizon_s)
    throw std::invalid_argument("merge_streams: mismatched horizons");
  EventStream out;
  out.n_levels = a.n_levels;
  out.horizon_s = a.horizon_s;
  out.cap_c = std::max(a.cap_c, b.cap_c);
  out.atoms.resize(a.atoms.size() + b.atoms.size());
  std::merge(a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
             out.atoms.begin(), atom_before);
  return out;
}

void write_event_csv(std::ostream& os, const EventStream& stream) {
  os << "kind,time_s,i,j,level,z,w,mark\n";
  char buf[512];
  for (const EventAtom& a : stream.atoms) {
    if (a.kind == AtomKind::neutral) {
      std::snprintf(buf, sizeof buf, "neutral,%.17g,%d,%d,,,,\n", a.time_s, a.src + 1,
                    a.dst + 1);
    } else {
      std::snprintf(buf, sizeof buf, "potential,%.17g,,,%d,%.17g,%.17g,%s\n", a.time_s,
                    a.level + 1, a.z, a.w, mark_name(a.mark));
    }
    os << buf;
  }
}

MergedEventSource::MergedEventSource(int n_levels, double cap_c, MarkSet marks,
                                     std::uint64_t seed)
    : cap_c_(cap_c) {
  streams_.reserve(static_cast<std::size_t>(n_levels) * (n_levels - 1) / 2 +
                   static_cast<std::size_t>(n_levels) * marks.count());
  for (int i = 0; i < n_levels; ++i) {
    for (int j = i + 1; j < n_levels; ++j) {
      StreamState st{Rng(derive_seed(seed, seed_tag::kNeutralStream, std::uint64_t(i),
                                     std::uint64_t(j))),
                     EventAtom{}, 1.0};
      st.next = first_neutral_atom(st.rng, i, j);
      streams_.push_back(st);
    }
  }
  if (cap_c > 0.0) {
    for (int level = 0; level < n_levels; ++level) {
      for (Mark mark : {Mark::beta, Mark::delta, Mark::lambda}) {
        if (!marks.contains(mark)) continue;
        StreamState st{Rng(derive_seed(seed, seed_tag::kPotentialStream,
                                       std::uint64_t(level), std::uint64_t(mark))),
                       EventAtom{}, cap_c};
        st.next = first_potential_atom(st.rng, level, mark, cap_c);
        streams_.push_back(st);
      }
    }
  }
  heap_.resize(streams_.size());
  for (std::size_t k = 0; k < heap_.size(); ++k) heap_[k] = k;
  for (std::size_t k = heap_.size(); k-- > 0;) sift_down(k);
}

bool MergedEventSource::heap_less(std::size_t a, std::size_t b) const {
  return atom_before(streams_[a].next, streams_[b].next);
}

void MergedEventSource::sift_up(std::size_t pos) {
  while (pos > 0) {
    std::size_t parent = (pos - 1) / 2;
    if (!heap_less(heap_[pos], heap_[parent])) break;
    std::swap(heap_[pos], heap_[parent]);
    pos = parent;
  }
}

void MergedEventSource::sift_down(std::size_t pos) {
  const std::size_t n = heap_.size();
  for (;;) {
    std::size_t best = pos;
    const std::size_t l = 2 * pos + 1, r = 2 * pos + 2;
    if (l < n && heap_less(heap_[l], heap_[best])) best = l;
    if (r < n && heap_less(heap_[r], heap_[best])) best = r;
    if (best == pos) return;
    std::swap(heap_[pos], heap_[best]);
    pos = best;
  }
}

const EventAtom* MergedEventSource::peek_until(double s_max) {
  if (heap_.empty()) return nullptr;
  const EventAtom& next = streams_[heap_[0]].next;
  return next.time_s <= s_max ? &next : nullptr;
}

EventAtom MergedEventSource::pop() {
  StreamState& st = streams_[heap_[0]];
  EventAtom out = st.next;
  if (out.kind == AtomKind::neutral) {
    advance_neutral(st.rng, st.next);
  } else {
    advance_potential(st.rng, st.next, st.rate);
  }
  sift_down(0);
  return out;
}

}  // namespace ldsim
