#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldsim/events.hpp"
#include "ldsim/lookdown.hpp"
#include "ldsim/parallel.hpp"

namespace ldsim {

struct UltrametricCheck {
  bool pass = true;
  // Worst violating triple (i,j,k): max{D(i,k), D(k,j)} < D(i,j) - tol.
  int i = -1, j = -1, k = -1;
  double violation = 0.0;  // D(i,j) - max{D(i,k), D(k,j)}, worst over triples
};

// Strong triangle inequality over all triples of a dense k x k matrix.
// Throws if the input is asymmetric or has a nonzero diagonal.  The OpenMP
// path reports the same worst triple as the serial reference.
UltrametricCheck check_ultrametric(std::span<const double> dense, int n, double tol,
                                   Exec exec = Exec::serial);

struct TreeNode {
  double height = 0.0;  // coalescence depth, half the pairwise distance
  int parent = -1;
  std::vector<int> children;
  int leaf_label = -1;  // 0-based leaf index, -1 for internal nodes
};

struct GenealogyTree {
  std::vector<TreeNode> nodes;  // leaves first (0..k-1), internals appended
  int root = -1;
  int num_leaves = 0;
};

// Single-linkage agglomeration; exact for ultrametric inputs.  Rejects
// non-ultrametric matrices (at tol relative to the max entry) with the
// violating triple in the exception message.
GenealogyTree ultrametric_to_tree(std::span<const double> dense, int n, double tol = -1.0);

// Leaf-to-leaf distances reproduced from the tree: D(a,b) = 2 * height(lca).
std::vector<double> tree_to_matrix(const GenealogyTree& tree);

// Newick text with branch lengths (heights are in clock units already).
// Leaves are labeled by `labels` or 1-based indices.
std::string to_newick(const GenealogyTree& tree, std::span<const int> labels = {});
GenealogyTree parse_newick(const std::string& text);

struct MarkedMatrixSample {
  int k = 0;
  std::vector<int> levels;          // the k distinct source levels drawn
  std::vector<double> dist;         // k x k dense
  std::vector<std::uint8_t> types;  // length k
};

// m samples of k distinct levels drawn uniformly without replacement;
// (R, G) restricted to the draw.
std::vector<MarkedMatrixSample> sample_marked_matrices(const LookdownState& state, int k, int m,
                                                       std::uint64_t seed);

// Level of the neutral ancestor at time s of the individual at `level` at
// time T, replayed backward through the neutral arrows.
int ancestor_level(const EventStream& neutral_events, double T, double s, int level);

struct RootId {
  double time_s = 0.0;  // 0 for the initial roots
  int level = 0;
  bool operator==(const RootId&) const = default;
};

struct FragmentMasses {
  std::vector<RootId> roots;
  std::vector<double> probe_times;
  // mass[p][r] = fraction of levels whose most recent root is roots[r] at
  // probe_times[p]
  std::vector<std::vector<double>> mass;
};

// Roots are the time-zero levels plus every potential atom position; each
// level at each probe is assigned to the most recent root on its neutral
// ancestral lineage.
FragmentMasses fragment_masses(const EventStream& potential_events,
                               const EventStream& neutral_events, double window_s,
                               std::span<const double> probe_times);

}  // namespace ldsim
