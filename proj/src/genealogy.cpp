#include "ldsim/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "ldsim/rng.hpp"

namespace ldsim {

namespace {

void require_distance_matrix(std::span<const double> dense, int n) {
  if (n < 1 || dense.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("check_ultrametric: dense size mismatch");
  for (int a = 0; a < n; ++a) {
    if (dense[std::size_t(a) * n + a] != 0.0)
      throw std::invalid_argument("check_ultrametric: nonzero diagonal");
    for (int b = a + 1; b < n; ++b) {
      if (dense[std::size_t(a) * n + b] != dense[std::size_t(b) * n + a])
        throw std::invalid_argument("check_ultrametric: asymmetric input");
      if (dense[std::size_t(a) * n + b] < 0.0)
        throw std::invalid_argument("check_ultrametric: negative entry");
    }
  }
}

struct WorstTriple {
  double violation = -std::numeric_limits<double>::infinity();
  int i = -1, j = -1, k = -1;

  void offer(double v, int i_, int j_, int k_) {
    if (v > violation ||
        (v == violation && std::tuple(i_, j_, k_) < std::tuple(i, j, k))) {
      violation = v;
      i = i_;
      j = j_;
      k = k_;
    }
  }
  void merge(const WorstTriple& o) {
    if (o.i >= 0) offer(o.violation, o.i, o.j, o.k);
  }
};

WorstTriple scan_row(std::span<const double> d, int n, int i) {
  WorstTriple worst;
  for (int j = i + 1; j < n; ++j) {
    const double dij = d[std::size_t(i) * n + j];
    for (int k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      const double m = std::max(d[std::size_t(i) * n + k], d[std::size_t(k) * n + j]);
      if (dij - m > worst.violation) worst.offer(dij - m, i, j, k);
    }
  }
  return worst;
}

}  // namespace

UltrametricCheck check_ultrametric(std::span<const double> dense, int n, double tol, Exec exec) {
  require_distance_matrix(dense, n);
  std::vector<WorstTriple> per_row(n);
  parallel_for(static_cast<std::size_t>(n), exec,
               [&](std::size_t i) { per_row[i] = scan_row(dense, n, static_cast<int>(i)); });
  WorstTriple worst;
  for (const auto& w : per_row) worst.merge(w);
  UltrametricCheck out;
  if (worst.i >= 0) {
    out.i = worst.i;
    out.j = worst.j;
    out.k = worst.k;
    out.violation = worst.violation;
    out.pass = worst.violation <= tol;
  }
  return out;
}

GenealogyTree ultrametric_to_tree(std::span<const double> dense, int n, double tol) {
  double max_entry = 0.0;
  for (double v : dense) max_entry = std::max(max_entry, v);
  if (tol < 0.0) tol = 1e-9 * max_entry;
  const UltrametricCheck check = check_ultrametric(dense, n, tol);
  if (!check.pass) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "ultrametric_to_tree: triple (%d,%d,%d) violates by %g", check.i, check.j,
                  check.k, check.violation);
    throw std::invalid_argument(msg);
  }

  GenealogyTree tree;
  tree.num_leaves = n;
  tree.nodes.resize(n);
  for (int i = 0; i < n; ++i) tree.nodes[i].leaf_label = i;
  if (n == 1) {
    tree.root = 0;
    return tree;
  }

  // Single-linkage agglomeration on cluster representatives.
  struct Cluster {
    int node;
    std::vector<int> members;
  };
  std::vector<Cluster> active;
  active.reserve(n);
  for (int i = 0; i < n; ++i) active.push_back({i, {i}});
  auto cluster_dist = [&](const Cluster& a, const Cluster& b) {
    double m = std::numeric_limits<double>::infinity();
    for (int x : a.members)
      for (int y : b.members) m = std::min(m, dense[std::size_t(x) * n + y]);
    return m;
  };
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = cluster_dist(active[i], active[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    TreeNode merged;
    merged.height = best / 2.0;
    merged.children = {active[bi].node, active[bj].node};
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(merged);
    tree.nodes[active[bi].node].parent = id;
    tree.nodes[active[bj].node].parent = id;
    active[bi].node = id;
    active[bi].members.insert(active[bi].members.end(), active[bj].members.begin(),
                              active[bj].members.end());
    active.erase(active.begin() + bj);
  }
  tree.root = active[0].node;
  return tree;
}

std::vector<double> tree_to_matrix(const GenealogyTree& tree) {
  const int n = tree.num_leaves;
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  // Collect the leaves under each node bottom-up; pairs split across the
  // children of a node coalesce at its height.
  std::vector<std::vector<int>> leaves_below(tree.nodes.size());
  for (std::size_t id = 0; id < tree.nodes.size(); ++id)
    if (tree.nodes[id].leaf_label >= 0) leaves_below[id] = {tree.nodes[id].leaf_label};
  // Nodes were appended in merge order, so children precede parents.
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const TreeNode& node = tree.nodes[id];
    if (node.children.empty()) continue;
    for (std::size_t a = 0; a < node.children.size(); ++a)
      for (std::size_t b = a + 1; b < node.children.size(); ++b)
        for (int x : leaves_below[node.children[a]])
          for (int y : leaves_below[node.children[b]]) {
            out[std::size_t(x) * n + y] = 2.0 * node.height;
            out[std::size_t(y) * n + x] = 2.0 * node.height;
          }
    for (int ch : node.children)
      leaves_below[id].insert(leaves_below[id].end(), leaves_below[ch].begin(),
                              leaves_below[ch].end());
  }
  return out;
}

namespace {

void newick_rec(const GenealogyTree& tree, int id, std::span<const int> labels,
                std::string& out) {
  const TreeNode& node = tree.nodes[id];
  if (node.leaf_label >= 0) {
    const int label = labels.empty() ? node.leaf_label + 1 : labels[node.leaf_label];
    out += std::to_string(label);
    return;
  }
  out += '(';
  for (std::size_t c = 0; c < node.children.size(); ++c) {
    if (c) out += ',';
    const int ch = node.children[c];
    newick_rec(tree, ch, labels, out);
    char buf[40];
    std::snprintf(buf, sizeof buf, ":%.17g", node.height - tree.nodes[ch].height);
    out += buf;
  }
  out += ')';
}

}  // namespace

std::string to_newick(const GenealogyTree& tree, std::span<const int> labels) {
  if (tree.root < 0) throw std::invalid_argument("to_newick: empty tree");
  std::string out;
  newick_rec(tree, tree.root, labels, out);
  out += ';';
  return out;
}

namespace {

struct NewickParser {
  const std::string& text;
  std::size_t pos = 0;

  char peek() const { return pos < text.size() ? text[pos] : '\0'; }
  char take() { return text[pos++]; }

  // Returns (node id, branch length to parent).
  std::pair<int, double> parse_node(GenealogyTree& tree) {
    int id;
    if (peek() == '(') {
      take();
      std::vector<std::pair<int, double>> children;
      children.push_back(parse_node(tree));
      while (peek() == ',') {
        take();
        children.push_back(parse_node(tree));
      }
      if (peek() != ')') throw std::invalid_argument("parse_newick: expected ')'");
      take();
      TreeNode node;
      id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(node);
      for (auto& [child, blen] : children) {
        tree.nodes[id].children.push_back(child);
        tree.nodes[child].parent = id;
        // Heights are recovered from child height + branch length; an
        // ultrametric tree makes this consistent across children.
        tree.nodes[id].height =
            std::max(tree.nodes[id].height, tree.nodes[child].height + blen);
      }
    } else {
      std::string name;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
             peek() == '.' || peek() == '-')
        name += take();
      if (name.empty()) throw std::invalid_argument("parse_newick: expected leaf name");
      TreeNode node;
      node.leaf_label = static_cast<int>(tree.num_leaves++);
      id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(node);
    }
    double blen = 0.0;
    if (peek() == ':') {
      take();
      std::size_t used = 0;
      blen = std::stod(text.substr(pos), &used);
      pos += used;
    }
    return {id, blen};
  }
};

}  // namespace

GenealogyTree parse_newick(const std::string& text) {
  GenealogyTree tree;
  NewickParser parser{text};
  auto [root, blen] = parser.parse_node(tree);
  (void)blen;
  if (parser.peek() != ';') throw std::invalid_argument("parse_newick: expected ';'");
  tree.root = root;
  return tree;
}

std::vector<MarkedMatrixSample> sample_marked_matrices(const LookdownState& state, int k, int m,
                                                       std::uint64_t seed) {
  const int n = state.n();
  if (k < 1 || k > n) throw std::invalid_argument("sample_marked_matrices: need 1 <= k <= n");
  if (m < 0) throw std::invalid_argument("sample_marked_matrices: need m >= 0");
  std::vector<MarkedMatrixSample> out;
  out.reserve(m);
  std::vector<int> pool(n);
  for (int sample = 0; sample < m; ++sample) {
    Rng rng(derive_seed(seed, seed_tag::kResample, static_cast<std::uint64_t>(sample)));
    for (int i = 0; i < n; ++i) pool[i] = i;
    MarkedMatrixSample s;
    s.k = k;
    s.levels.resize(k);
    for (int i = 0; i < k; ++i) {
      const int pick = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[pick]);
      s.levels[i] = pool[i];
    }
    s.types.resize(k);
    s.dist.assign(static_cast<std::size_t>(k) * k, 0.0);
    for (int a = 0; a < k; ++a) {
      s.types[a] = state.types[s.levels[a]];
      for (int b = 0; b < k; ++b)
        s.dist[std::size_t(a) * k + b] = state.r.at(s.levels[a], s.levels[b]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

int ancestor_level(const EventStream& neutral_events, double T, double s, int level) {
  if (s < 0.0 || s > T) throw std::invalid_argument("ancestor_level: need 0 <= s <= T");
  if (level < 0 || level >= neutral_events.n_levels)
    throw std::invalid_argument("ancestor_level: level out of range");
  if (neutral_events.horizon_s < T)
    throw std::invalid_argument("ancestor_level: events do not cover [s, T]");
  const auto& atoms = neutral_events.atoms;
  // First atom with time > T, then walk backward over times in (s, T].
  auto hi = std::upper_bound(atoms.begin(), atoms.end(), T,
                             [](double t, const EventAtom& a) { return t < a.time_s; });
  int cur = level;
  while (hi != atoms.begin()) {
    --hi;
    if (hi->time_s <= s) break;
    if (hi->kind != AtomKind::neutral) continue;
    if (cur > hi->dst) {
      --cur;
    } else if (cur == hi->dst) {
      cur = hi->src;
    }
  }
  return cur;
}

FragmentMasses fragment_masses(const EventStream& potential_events,
                               const EventStream& neutral_events, double window_s,
                               std::span<const double> probe_times) {
  const int n = neutral_events.n_levels;
  if (potential_events.n_levels != n)
    throw std::invalid_argument("fragment_masses: stream level counts differ");
  FragmentMasses out;
  out.probe_times.assign(probe_times.begin(), probe_times.end());

  // Roots: the time-zero levels, then every potential atom position.
  std::vector<std::vector<double>> root_times(n);          // per level, ascending
  std::vector<std::vector<int>> root_index(n);             // matching root ids
  for (int i = 0; i < n; ++i) out.roots.push_back({0.0, i});
  for (const EventAtom& a : potential_events.atoms) {
    if (a.kind != AtomKind::potential || a.time_s > window_s) continue;
    root_times[a.level].push_back(a.time_s);
    root_index[a.level].push_back(static_cast<int>(out.roots.size()));
    out.roots.push_back({a.time_s, a.level});
  }

  const auto& atoms = neutral_events.atoms;
  out.mass.assign(probe_times.size(), std::vector<double>(out.roots.size(), 0.0));
  for (std::size_t p = 0; p < probe_times.size(); ++p) {
    const double probe = probe_times[p];
    if (probe < 0.0 || probe > window_s)
      throw std::invalid_argument("fragment_masses: probe outside window");
    auto hi = std::upper_bound(atoms.begin(), atoms.end(), probe,
                               [](double t, const EventAtom& a) { return t < a.time_s; });
    for (int j = 0; j < n; ++j) {
      int cur = j;
      double seg_hi = probe;
      int root = -1;
      auto it = hi;
      while (root < 0 && it != atoms.begin()) {
        --it;
        if (it->kind != AtomKind::neutral) continue;
        // Latest potential root at the current level inside (atom time, seg_hi].
        const auto& times = root_times[cur];
        auto rt = std::upper_bound(times.begin(), times.end(), seg_hi);
        if (rt != times.begin() && *(rt - 1) > it->time_s) {
          root = root_index[cur][static_cast<std::size_t>((rt - 1) - times.begin())];
          break;
        }
        if (cur > it->dst) {
          --cur;
        } else if (cur == it->dst) {
          cur = it->src;
        }
        seg_hi = it->time_s;
      }
      if (root < 0) {
        const auto& times = root_times[cur];
        auto rt = std::upper_bound(times.begin(), times.end(), seg_hi);
        if (rt != times.begin() && *(rt - 1) > 0.0) {
          root = root_index[cur][static_cast<std::size_t>((rt - 1) - times.begin())];
        } else {
          root = cur;  // time-zero root of the terminal level
        }
      }
      out.mass[p][root] += 1.0 / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace ldsim
