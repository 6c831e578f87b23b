#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ldsim/engine.hpp"
#include "ldsim/genealogy.hpp"
#include "ldsim/rng.hpp"
#include "ldsim/stats.hpp"

using namespace ldsim;

namespace {

constexpr std::uint8_t A = 0, B = 1;

// Random ultrametric by random binary merges at increasing heights,
// independent of the library's tree machinery.
std::vector<double> random_ultrametric(int n, Rng& rng) {
  std::vector<std::vector<int>> clusters(n);
  for (int i = 0; i < n; ++i) clusters[i] = {i};
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  double height = 0.0;
  while (clusters.size() > 1) {
    height += 0.1 + rng.uniform01();
    const std::size_t i = rng.below(clusters.size());
    std::size_t j = rng.below(clusters.size() - 1);
    if (j >= i) ++j;
    for (int a : clusters[i])
      for (int b : clusters[j]) {
        d[std::size_t(a) * n + b] = 2.0 * height;
        d[std::size_t(b) * n + a] = 2.0 * height;
      }
    clusters[std::min(i, j)].insert(clusters[std::min(i, j)].end(),
                                    clusters[std::max(i, j)].begin(),
                                    clusters[std::max(i, j)].end());
    clusters.erase(clusters.begin() + std::max(i, j));
  }
  return d;
}

}  // namespace

TEST_CASE("ultrametric check: worked examples") {
  const std::vector<double> zero(9, 0.0);
  CHECK(check_ultrametric(zero, 3, 0.0).pass);

  const std::vector<double> good{0, 2, 5, 2, 0, 5, 5, 5, 0};
  CHECK(check_ultrametric(good, 3, 0.0).pass);

  const std::vector<double> bad{0, 2, 5, 2, 0, 3, 5, 3, 0};
  const UltrametricCheck c = check_ultrametric(bad, 3, 0.0);
  CHECK(!c.pass);
  CHECK(c.i == 0);
  CHECK(c.j == 2);
  CHECK(c.k == 1);
  CHECK(c.violation == doctest::Approx(2.0));
  CHECK(check_ultrametric(bad, 3, 2.0).pass);  // tolerant check accepts it

  std::vector<double> asym = good;
  asym[1] = 3.0;
  CHECK_THROWS_AS(check_ultrametric(asym, 3, 0.0), std::invalid_argument);
  std::vector<double> diag = good;
  diag[0] = 1.0;
  CHECK_THROWS_AS(check_ultrametric(diag, 3, 0.0), std::invalid_argument);
}

TEST_CASE("serial and openmp scans agree on the worst triple") {
  Rng rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12;
    std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double v = rng.uniform01();
        d[std::size_t(a) * n + b] = v;
        d[std::size_t(b) * n + a] = v;
      }
    const UltrametricCheck s = check_ultrametric(d, n, 1e-3, Exec::serial);
    const UltrametricCheck p = check_ultrametric(d, n, 1e-3, Exec::openmp);
    CHECK(s.pass == p.pass);
    CHECK(s.i == p.i);
    CHECK(s.j == p.j);
    CHECK(s.k == p.k);
    CHECK(s.violation == p.violation);
  }
}

TEST_CASE("tree construction: worked examples") {
  // A cherry: two leaves at height 2.
  const std::vector<double> cherry{0, 4, 4, 0};
  const GenealogyTree t2 = ultrametric_to_tree(cherry, 2);
  CHECK(t2.num_leaves == 2);
  CHECK(t2.nodes[t2.root].height == doctest::Approx(2.0));
  CHECK(to_newick(t2) == "(1:2,2:2);");

  // Two merges: (1,2) at height 1, then 3 joins at height 3.
  const std::vector<double> three{0, 2, 6, 2, 0, 6, 6, 6, 0};
  const GenealogyTree t3 = ultrametric_to_tree(three, 3);
  CHECK(tree_to_matrix(t3) == std::vector<double>{0, 2, 6, 2, 0, 6, 6, 6, 0});

  // Single leaf.
  const std::vector<double> lone{0.0};
  const GenealogyTree t1 = ultrametric_to_tree(lone, 1);
  CHECK(t1.num_leaves == 1);
  CHECK(t1.root == 0);

  // Non-ultrametric input is rejected with the violating triple.
  const std::vector<double> bad{0, 2, 5, 2, 0, 3, 5, 3, 0};
  CHECK_THROWS_WITH_AS(ultrametric_to_tree(bad, 3, 0.0),
                       doctest::Contains("(0,2,1)"), std::invalid_argument);
}

TEST_CASE("matrix -> tree -> matrix round trip on random ultrametrics") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(12));
    const std::vector<double> d = random_ultrametric(n, rng);
    const GenealogyTree tree = ultrametric_to_tree(d, n);
    const std::vector<double> back = tree_to_matrix(tree);
    double max_entry = 0.0;
    for (double v : d) max_entry = std::max(max_entry, v);
    for (std::size_t k = 0; k < d.size(); ++k)
      CHECK(std::abs(back[k] - d[k]) <= 1e-9 * max_entry);
  }
}

TEST_CASE("newick serialization round trips through the parser") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(8));
    const std::vector<double> d = random_ultrametric(n, rng);
    const GenealogyTree tree = ultrametric_to_tree(d, n);
    const std::string nwk = to_newick(tree);
    const GenealogyTree parsed = parse_newick(nwk);
    CHECK(parsed.num_leaves == n);
    // Leaf labels are assigned in serialization order; distances must agree
    // up to that relabeling.
    const std::vector<double> back = tree_to_matrix(parsed);
    std::vector<double> expect = tree_to_matrix(tree);
    // Recover the leaf order used by the serializer.
    std::vector<int> order;
    std::string token;
    for (char ch : nwk) {
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        token += ch;
      } else {
        if (!token.empty() && (ch == ':')) order.push_back(std::stoi(token) - 1);
        token.clear();
      }
    }
    REQUIRE(order.size() == static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        CHECK(back[std::size_t(a) * n + b] ==
              doctest::Approx(expect[std::size_t(order[a]) * n + order[b]]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(parse_newick("(1:2,2:2"), std::invalid_argument);
}

TEST_CASE("marked matrix resampling") {
  LookdownState st(6, 2);
  st.set_types(std::vector<std::uint8_t>{A, B, A, B, A, B});
  Rng rng(3);
  // Give the state a nontrivial ultrametric.
  st.r = GrowingDistanceMatrix(6, random_ultrametric(6, rng));

  // k = n returns the full matrix up to relabeling.
  const auto full = sample_marked_matrices(st, 6, 3, 10);
  for (const auto& s : full) {
    std::vector<int> sorted = s.levels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        CHECK(s.dist[std::size_t(a) * 6 + b] == st.r.at(s.levels[a], s.levels[b]));
    CHECK(check_ultrametric(s.dist, s.k, 1e-9 * st.r.max_entry()).pass);
  }

  // k = 1: drawn-type frequency approaches mu_a.
  const auto singles = sample_marked_matrices(st, 1, 4000, 11);
  double freq = 0.0;
  for (const auto& s : singles) freq += s.types[0] == A ? 1.0 : 0.0;
  freq /= static_cast<double>(singles.size());
  const double se = std::sqrt(0.5 * 0.5 / 4000.0);
  CHECK(std::abs(freq - st.mu_a()) <= 3.0 * se);

  // Monotype state: every sample is monotype.
  LookdownState mono(4, 2);
  mono.set_types(std::vector<std::uint8_t>{A, A, A, A});
  for (const auto& s : sample_marked_matrices(mono, 3, 20, 12))
    for (auto t : s.types) CHECK(t == A);

  CHECK_THROWS_AS(sample_marked_matrices(st, 7, 1, 1), std::invalid_argument);
}

TEST_CASE("resampled mean pair distance matches the state's mean entry") {
  LookdownState st(12, 2);
  st.set_types(std::vector<std::uint8_t>(12, A));
  Rng rng(8);
  st.r = GrowingDistanceMatrix(12, random_ultrametric(12, rng));
  double mean_entry = 0.0;
  int pairs = 0;
  for (int a = 0; a < 12; ++a)
    for (int b = a + 1; b < 12; ++b) {
      mean_entry += st.r.at(a, b);
      ++pairs;
    }
  mean_entry /= pairs;
  Accumulator acc;
  for (const auto& s : sample_marked_matrices(st, 2, 3000, 21)) acc.add(s.dist[1]);
  CHECK(std::abs(acc.mean() - mean_entry) <= 3.0 * acc.standard_error());
}

TEST_CASE("ancestor replay: worked examples") {
  EventStream empty{4, 1.0, 0.0, {}};
  CHECK(ancestor_level(empty, 1.0, 0.0, 2) == 2);

  EventStream one{4, 1.0, 0.0, {}};
  EventAtom arrow;
  arrow.kind = AtomKind::neutral;
  arrow.time_s = 0.5;
  arrow.src = 0;
  arrow.dst = 1;
  one.atoms.push_back(arrow);
  CHECK(ancestor_level(one, 1.0, 0.0, 1) == 0);  // jump case: level == arrow target
  CHECK(ancestor_level(one, 1.0, 0.0, 2) == 1);  // shift-down case: level above target
  CHECK(ancestor_level(one, 1.0, 0.0, 0) == 0);
  CHECK(ancestor_level(one, 1.0, 0.6, 2) == 2);  // window below the atom
  CHECK_THROWS_AS(ancestor_level(one, 1.0, 0.0, 7), std::invalid_argument);
  CHECK_THROWS_AS(ancestor_level(one, 2.0, 0.0, 1), std::invalid_argument);
}

TEST_CASE("neutral engine types equal the ancestor transport of G0") {
  RunConfig cfg;
  cfg.n_levels = 16;
  cfg.M = 50.0;
  cfg.horizon_s = 1.0;
  cfg.v0 = 1.0;
  cfg.seed = 404;
  cfg.init_types = {A, B, B, A, B, A, A, B, A, B, B, B, A, A, B, A};
  const EventStream events = gen_neutral_events(cfg.n_levels, cfg.horizon_s, cfg.seed);
  Engine<TwoTypeModel> engine(cfg, TwoTypeModel{0.0, 0.0}, events);
  std::vector<std::pair<double, std::vector<std::uint8_t>>> probes_seen;
  EngineHooks hooks;
  hooks.on_probe = [&](const LookdownState& st) { probes_seen.emplace_back(st.s, st.types); };
  const std::vector<double> probes{0.25, 0.5, 0.75, 1.0};
  engine.run(probes, &hooks);
  REQUIRE(probes_seen.size() == probes.size());
  for (const auto& [s, types] : probes_seen) {
    for (int j = 0; j < cfg.n_levels; ++j) {
      const int a = ancestor_level(events, s, 0.0, j);
      CHECK(types[j] == cfg.init_types[a]);
    }
  }
}

TEST_CASE("fragment masses: worked examples") {
  const int n = 4;
  EventStream no_neutral{n, 1.0, 0.0, {}};
  EventStream no_potential{n, 1.0, 5.0, {}};

  // No events at all: every level keeps its time-zero root.
  const FragmentMasses fm0 =
      fragment_masses(no_potential, no_neutral, 1.0, std::vector<double>{0.5, 1.0});
  REQUIRE(fm0.roots.size() == n);
  for (const auto& row : fm0.mass)
    for (double m : row) CHECK(m == doctest::Approx(0.25));

  // One potential atom at level 1, time 0.3: it re-roots only level 1.
  EventStream one_atom{n, 1.0, 5.0, {}};
  EventAtom atom;
  atom.kind = AtomKind::potential;
  atom.time_s = 0.3;
  atom.level = 0;
  atom.mark = Mark::delta;
  one_atom.atoms.push_back(atom);
  const FragmentMasses fm1 =
      fragment_masses(one_atom, no_neutral, 1.0, std::vector<double>{0.2, 0.5});
  REQUIRE(fm1.roots.size() == n + 1);
  CHECK(fm1.mass[0][0] == doctest::Approx(0.25));  // before the atom
  CHECK(fm1.mass[0][n] == 0.0);
  CHECK(fm1.mass[1][0] == 0.0);  // after: the root of level 1 moved
  CHECK(fm1.mass[1][n] == doctest::Approx(0.25));
}

TEST_CASE("fragment masses partition the levels") {
  const int n = 8;
  const std::uint64_t seed = 31415;
  const EventStream neutral = gen_neutral_events(n, 1.0, seed);
  const EventStream potential =
      gen_potential_events(n, 1.0, 3.0, MarkSet::beta_delta(), seed);
  const std::vector<double> probes{0.1, 0.4, 0.7, 1.0};
  const FragmentMasses fm = fragment_masses(potential, neutral, 1.0, probes);
  for (const auto& row : fm.mass) {
    double total = 0.0;
    for (double m : row) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("without potential atoms, fragments agree with the ancestor map") {
  const int n = 6;
  const EventStream neutral = gen_neutral_events(n, 1.0, 2024);
  EventStream no_potential{n, 1.0, 5.0, {}};
  const std::vector<double> probes{0.5};
  const FragmentMasses fm = fragment_masses(no_potential, neutral, 1.0, probes);
  std::vector<double> expect(n, 0.0);
  for (int j = 0; j < n; ++j) expect[ancestor_level(neutral, 0.5, 0.0, j)] += 1.0 / n;
  for (int r = 0; r < n; ++r) CHECK(fm.mass[0][r] == doctest::Approx(expect[r]).epsilon(1e-12));
}
