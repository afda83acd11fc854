#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dynvine/kendall.hpp"

namespace dynvine {

/// An edge of an R-vine tree. Variables are labelled 1..d. For tree 1 the
/// parents are the two variables; for tree j >= 2 they index edges of tree j-1.
/// The conditioned pair is stored with a < b; the edge's copula takes the
/// pseudo-observation of a as its first argument.
struct VineEdge {
  int tree = 1;
  int a = 0, b = 0;
  std::vector<int> conditioning;  // sorted
  int left = -1, right = -1;      // parent nodes, left < right

  /// "a,b" in tree 1 and "a,b;c,d,..." above.
  std::string label() const;
  friend bool operator==(const VineEdge&, const VineEdge&) = default;
};

enum class StructureClass { General, CVine, DVine };
std::string to_string(StructureClass c);
StructureClass parse_structure_class(std::string_view name);

struct ValidationReport {
  bool ok = true;
  std::string message;
  explicit operator bool() const { return ok; }
};

class RVineStructure {
 public:
  RVineStructure() = default;
  explicit RVineStructure(int d);

  int dim() const { return d_; }
  /// Number of trees currently present (d - 1 once complete).
  int levels() const { return static_cast<int>(trees_.size()); }
  const std::vector<VineEdge>& tree(int level) const { return trees_.at(level - 1); }
  const std::vector<std::vector<VineEdge>>& trees() const { return trees_; }
  const VineEdge& edge(int level, std::size_t index) const { return trees_.at(level - 1).at(index); }
  bool complete() const { return levels() == d_ - 1; }

  /// Appends the next tree. Edges must be spanning-tree edges over the nodes of
  /// the previous level; conditioned and conditioning sets are recomputed from
  /// the parents.
  void add_tree(std::vector<VineEdge> edges);
  /// Appends edges exactly as given, without checks. Use validate() afterwards.
  void add_tree_unchecked(std::vector<VineEdge> edges) { trees_.push_back(std::move(edges)); }

  /// Sorted complete union of an edge.
  std::vector<int> complete_union(int level, std::size_t index) const;
  /// Position of the edge with the given conditioned pair and conditioning set,
  /// or -1.
  int find_edge(int level, int a, int b, std::span<const int> conditioning) const;

  friend bool operator==(const RVineStructure&, const RVineStructure&) = default;

 private:
  int d_ = 0;
  std::vector<std::vector<VineEdge>> trees_;
};

/// Checks the tree-sequence conditions: spanning trees of the right sizes, the
/// proximity condition and consistency of the stored conditioned/conditioning
/// sets. Reports the first violation.
ValidationReport validate(const RVineStructure& s);

/// Conditioned pair {a, b} and conditioning set D of an edge joining two nodes
/// of the given level (1-based), computed from complete unions. Requires the
/// structure to contain levels 1..level-1.
VineEdge make_edge(const RVineStructure& s, int level, int left, int right);

/// Candidate edges of tree `level` allowed by the proximity condition.
std::vector<VineEdge> allowed_edges(const RVineStructure& s, int level);

/// Maximum spanning tree over candidate edges with the given weights (usually
/// |tau|). Nodes are variables for level 1 and edge positions of the previous
/// tree otherwise. Ties are resolved in lexicographic (left, right) order.
/// CVine: the star whose centre has the largest weight sum. DVine: a greedy
/// Hamiltonian path at level 1; above level 1 the candidates are returned as is
/// after checking they form a spanning tree.
std::vector<VineEdge> select_tree(std::span<const VineEdge> candidates, std::span<const double> weights,
                                  std::size_t n_nodes, StructureClass cls, int level);

/// Number of R-vine tree sequences on d variables: d!/2 * 2^C(d-2, 2).
boost::multiprecision::cpp_int count_structures(int d);

/// Where an edge's pseudo-observations come from. For tree 1 `node` is the
/// 0-based variable index and `side` is -1. Above tree 1 `node` indexes the
/// previous tree and `side` selects that edge's output for its conditioned
/// variable a (0) or b (1).
struct NodeSide {
  int node = 0;
  int side = -1;
};
struct EdgeInputs {
  NodeSide a, b;
};
EdgeInputs edge_inputs(const RVineStructure& s, int level, std::size_t index);
/// Same for an edge that need not be part of s yet (e.g. a candidate of the
/// next tree); levels below e.tree must be present.
EdgeInputs edge_inputs(const RVineStructure& s, const VineEdge& e);

/// Lower-triangular R-vine matrix (row-major d x d, zero above the diagonal).
/// Column j has diagonal variable M[j][j]; for i > j the entry M[i][j] is the
/// partner of M[j][j] in an edge of tree d - i whose conditioning set is
/// {M[i+1][j], ..., M[d-1][j]}. The last row therefore lists tree 1.
std::vector<int> to_matrix(const RVineStructure& s);
RVineStructure from_matrix(std::span<const int> matrix, int d);

/// Edge (level, index) occupying entry (row, col) of to_matrix(s), row > col.
struct MatrixCell {
  int row = 0, col = 0;
};
/// Cell of each edge in the matrix layout, indexed [level - 1][edge index].
std::vector<std::vector<MatrixCell>> matrix_cells(const RVineStructure& s);

/// Text form: d lines, line i holding the first i + 1 entries of row i.
std::string format_matrix(const RVineStructure& s);
RVineStructure parse_matrix(std::string_view text);

/// The six-dimensional structure used in the simulation study (tree 1 edges
/// 1-2, 2-6, 3-6, 4-6, 5-6).
RVineStructure six_dim_example_structure();

}  // namespace dynvine
