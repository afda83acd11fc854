#include "dynvine/vine_structure.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dynvine {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

bool edge_less(const VineEdge& x, const VineEdge& y) {
  return std::tie(x.left, x.right) < std::tie(y.left, y.right);
}

std::vector<int> sorted_union(const std::vector<int>& x, const std::vector<int>& y) {
  std::vector<int> out;
  std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
  return out;
}

// Whether two nodes of tree `level` (edges of tree level - 1) share a node. For
// level 2 the shared nodes are variables.
bool share_node(const RVineStructure& s, int level, int x, int y) {
  if (level == 1) return false;
  const VineEdge& p = s.edge(level - 1, x);
  const VineEdge& q = s.edge(level - 1, y);
  return p.left == q.left || p.left == q.right || p.right == q.left || p.right == q.right;
}

// Node count of tree `level` given the previous trees.
std::size_t node_count(const RVineStructure& s, int level) {
  return level == 1 ? static_cast<std::size_t>(s.dim()) : s.tree(level - 1).size();
}

ValidationReport fail(std::string msg) { return {false, std::move(msg)}; }

}  // namespace

std::string VineEdge::label() const {
  std::ostringstream os;
  os << a << "," << b;
  if (!conditioning.empty()) {
    os << ";";
    for (std::size_t i = 0; i < conditioning.size(); ++i) os << (i ? "," : "") << conditioning[i];
  }
  return os.str();
}

std::string to_string(StructureClass c) {
  switch (c) {
    case StructureClass::General:
      return "general";
    case StructureClass::CVine:
      return "cvine";
    case StructureClass::DVine:
      return "dvine";
  }
  return "?";
}

StructureClass parse_structure_class(std::string_view name) {
  if (name == "general" || name == "rvine") return StructureClass::General;
  if (name == "cvine") return StructureClass::CVine;
  if (name == "dvine") return StructureClass::DVine;
  throw std::invalid_argument("unknown structure class '" + std::string(name) + "'");
}

RVineStructure::RVineStructure(int d) : d_(d) {
  if (d < 2) throw std::invalid_argument("a vine needs at least two variables");
}

void RVineStructure::add_tree(std::vector<VineEdge> edges) {
  if (complete()) throw std::logic_error("add_tree: structure already has d - 1 trees");
  const int level = levels() + 1;
  for (VineEdge& e : edges) {
    if (e.left > e.right) std::swap(e.left, e.right);
    e = make_edge(*this, level, e.left, e.right);
  }
  std::sort(edges.begin(), edges.end(), edge_less);
  trees_.push_back(std::move(edges));
  const ValidationReport rep = validate(*this);
  if (!rep.ok) {
    trees_.pop_back();
    throw std::invalid_argument("add_tree: " + rep.message);
  }
}

std::vector<int> RVineStructure::complete_union(int level, std::size_t index) const {
  const VineEdge& e = edge(level, index);
  if (level == 1) return {std::min(e.left, e.right), std::max(e.left, e.right)};
  return sorted_union(complete_union(level - 1, e.left), complete_union(level - 1, e.right));
}

int RVineStructure::find_edge(int level, int a, int b, std::span<const int> conditioning) const {
  if (a > b) std::swap(a, b);
  if (level < 1 || level > levels()) return -1;
  std::vector<int> d(conditioning.begin(), conditioning.end());
  std::sort(d.begin(), d.end());
  const auto& t = tree(level);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].a == a && t[i].b == b && t[i].conditioning == d) return static_cast<int>(i);
  return -1;
}

VineEdge make_edge(const RVineStructure& s, int level, int left, int right) {
  if (left > right) std::swap(left, right);
  VineEdge e;
  e.tree = level;
  e.left = left;
  e.right = right;
  if (level == 1) {
    if (left < 1 || right > s.dim() || left == right)
      throw std::invalid_argument("make_edge: invalid variable pair");
    e.a = left;
    e.b = right;
    return e;
  }
  if (level - 1 > s.levels()) throw std::invalid_argument("make_edge: previous tree missing");
  const std::size_t n = s.tree(level - 1).size();
  if (left < 0 || static_cast<std::size_t>(right) >= n || left == right)
    throw std::invalid_argument("make_edge: invalid node pair");
  const std::vector<int> A = s.complete_union(level - 1, left);
  const std::vector<int> B = s.complete_union(level - 1, right);
  std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(e.conditioning));
  std::vector<int> sym;
  std::set_symmetric_difference(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(sym));
  if (sym.size() != 2 || e.conditioning.size() != static_cast<std::size_t>(level - 1))
    throw std::invalid_argument("make_edge: nodes " + std::to_string(left) + " and " +
                                std::to_string(right) + " of tree " + std::to_string(level) +
                                " violate the proximity condition");
  e.a = sym[0];
  e.b = sym[1];
  return e;
}

ValidationReport validate(const RVineStructure& s) {
  const int d = s.dim();
  if (d < 2) return fail("dimension must be at least 2");
  if (s.levels() > d - 1) return fail("more than d - 1 trees");
  for (int level = 1; level <= s.levels(); ++level) {
    const auto& t = s.tree(level);
    const std::size_t n = node_count(s, level);
    const std::string where = "tree " + std::to_string(level);
    if (t.size() != n - 1)
      return fail(where + " has " + std::to_string(t.size()) + " edges, expected " + std::to_string(n - 1));
    UnionFind uf(n + 1);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const VineEdge& e = t[i];
      const std::string ew = where + " edge " + std::to_string(i);
      if (e.tree != level) return fail(ew + " carries the wrong tree level");
      const int lo = level == 1 ? 1 : 0;
      const int hi = level == 1 ? d : static_cast<int>(n) - 1;
      if (e.left < lo || e.right > hi || e.left >= e.right) return fail(ew + " has invalid endpoints");
      if (level >= 2 && !share_node(s, level, e.left, e.right))
        return fail(ew + " violates the proximity condition");
      if (!uf.unite(e.left, e.right)) return fail(where + " contains a cycle");
      VineEdge ref;
      try {
        ref = make_edge(s, level, e.left, e.right);
      } catch (const std::invalid_argument& ex) {
        return fail(ew + ": " + ex.what());
      }
      if (ref.a != e.a || ref.b != e.b || ref.conditioning != e.conditioning)
        return fail(ew + " stores " + e.label() + " but its parents imply " + ref.label());
    }
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j)
        if (t[i].a == t[j].a && t[i].b == t[j].b && t[i].conditioning == t[j].conditioning)
          return fail(where + " repeats edge " + t[i].label());
  }
  return {};
}

std::vector<VineEdge> allowed_edges(const RVineStructure& s, int level) {
  if (level < 1 || level > s.dim() - 1) throw std::invalid_argument("allowed_edges: level out of range");
  if (s.levels() < level - 1) throw std::invalid_argument("allowed_edges: lower trees missing");
  std::vector<VineEdge> out;
  if (level == 1) {
    for (int i = 1; i <= s.dim(); ++i)
      for (int j = i + 1; j <= s.dim(); ++j) out.push_back(make_edge(s, 1, i, j));
    return out;
  }
  const auto& prev = s.tree(level - 1);
  for (std::size_t i = 0; i < prev.size(); ++i)
    for (std::size_t j = i + 1; j < prev.size(); ++j) {
      if (share_node(s, level, static_cast<int>(i), static_cast<int>(j)))
        out.push_back(make_edge(s, level, static_cast<int>(i), static_cast<int>(j)));
    }
  return out;
}

std::vector<VineEdge> select_tree(std::span<const VineEdge> candidates, std::span<const double> weights,
                                  std::size_t n_nodes, StructureClass cls, int level) {
  if (weights.size() != candidates.size()) throw std::invalid_argument("select_tree: weight count mismatch");
  if (n_nodes < 2) throw std::invalid_argument("select_tree: need at least two nodes");
  const int base = level == 1 ? 1 : 0;  // node labels start at 1 for variables
  auto node = [&](int label) { return static_cast<std::size_t>(label - base); };
  for (const VineEdge& e : candidates)
    if (e.left < base || node(e.right) >= n_nodes || e.left >= e.right)
      throw std::invalid_argument("select_tree: candidate with invalid endpoints");

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (weights[x] != weights[y]) return weights[x] > weights[y];
    return edge_less(candidates[x], candidates[y]);
  });

  std::vector<VineEdge> out;
  auto finish = [&]() {
    if (out.size() != n_nodes - 1)
      throw std::runtime_error("select_tree: candidate graph of tree " + std::to_string(level) +
                               " is disconnected");
    std::sort(out.begin(), out.end(), edge_less);
    return out;
  };

  if (cls == StructureClass::General || (cls == StructureClass::DVine && level > 1)) {
    if (cls == StructureClass::DVine && candidates.size() != n_nodes - 1)
      throw std::runtime_error("select_tree: D-vine candidates above tree 1 must form a path");
    UnionFind uf(n_nodes);
    for (std::size_t i : order)
      if (uf.unite(node(candidates[i].left), node(candidates[i].right))) out.push_back(candidates[i]);
    return finish();
  }

  // weight lookup by node pair
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> by_pair;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    by_pair[{node(candidates[i].left), node(candidates[i].right)}] = i;
  auto lookup = [&](std::size_t x, std::size_t y) -> long {
    auto it = by_pair.find({std::min(x, y), std::max(x, y)});
    return it == by_pair.end() ? -1 : static_cast<long>(it->second);
  };

  if (cls == StructureClass::CVine) {
    std::vector<double> sums(n_nodes, 0.0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      sums[node(candidates[i].left)] += weights[i];
      sums[node(candidates[i].right)] += weights[i];
    }
    std::size_t root = 0;
    for (std::size_t v = 1; v < n_nodes; ++v)
      if (sums[v] > sums[root]) root = v;
    for (std::size_t v = 0; v < n_nodes; ++v) {
      if (v == root) continue;
      const long i = lookup(root, v);
      if (i < 0) throw std::runtime_error("select_tree: C-vine root is not adjacent to every node");
      out.push_back(candidates[i]);
    }
    return finish();
  }

  // D-vine, tree 1: greedy path from the heaviest edge
  if (order.empty()) throw std::runtime_error("select_tree: no candidate edges");
  const VineEdge& first = candidates[order.front()];
  std::deque<std::size_t> path = {node(first.left), node(first.right)};
  std::vector<bool> used(n_nodes, false);
  used[path.front()] = used[path.back()] = true;
  out.push_back(first);
  while (path.size() < n_nodes) {
    long best_i = -1;
    bool at_front = true;
    std::size_t best_v = 0;
    for (int side = 0; side < 2; ++side) {
      const std::size_t end = side == 0 ? path.front() : path.back();
      for (std::size_t v = 0; v < n_nodes; ++v) {
        if (used[v]) continue;
        const long i = lookup(end, v);
        if (i < 0) continue;
        if (best_i < 0 || weights[i] > weights[best_i] ||
            (weights[i] == weights[best_i] && edge_less(candidates[i], candidates[best_i]))) {
          best_i = i;
          best_v = v;
          at_front = side == 0;
        }
      }
    }
    if (best_i < 0) throw std::runtime_error("select_tree: cannot extend the D-vine path");
    used[best_v] = true;
    if (at_front)
      path.push_front(best_v);
    else
      path.push_back(best_v);
    out.push_back(candidates[best_i]);
  }
  return finish();
}

EdgeInputs edge_inputs(const RVineStructure& s, int level, std::size_t index) {
  return edge_inputs(s, s.edge(level, index));
}

EdgeInputs edge_inputs(const RVineStructure& s, const VineEdge& e) {
  const int level = e.tree;
  if (level == 1) return {{e.a - 1, -1}, {e.b - 1, -1}};
  auto locate = [&](int var) -> NodeSide {
    for (int p : {e.left, e.right}) {
      const VineEdge& q = s.edge(level - 1, p);
      if (q.a == var) return {p, 0};
      if (q.b == var) return {p, 1};
    }
    throw std::logic_error("edge_inputs: variable " + std::to_string(var) + " not found in the parents of " +
                           e.label());
  };
  return {locate(e.a), locate(e.b)};
}

boost::multiprecision::cpp_int count_structures(int d) {
  if (d < 2) throw std::invalid_argument("count_structures: d must be >= 2");
  boost::multiprecision::cpp_int f = 1;
  for (int i = 3; i <= d; ++i) f *= i;  // d!/2
  const long e = static_cast<long>(d - 2) * (d - 3) / 2;
  boost::multiprecision::cpp_int p = 1;
  p <<= e;
  return f * p;
}

std::vector<int> to_matrix(const RVineStructure& s) {
  if (!s.complete()) throw std::invalid_argument("to_matrix: structure is incomplete");
  const int d = s.dim();
  std::vector<int> M(static_cast<std::size_t>(d) * d, 0);
  std::vector<std::vector<bool>> active(d - 1);
  for (int l = 1; l <= d - 1; ++l) active[l - 1].assign(s.tree(l).size(), true);
  std::vector<bool> var_left(d + 1, true);

  for (int j = 0; j < d - 1; ++j) {
    const int k = d - j;  // variables still present
    int top = -1;
    for (std::size_t i = 0; i < active[k - 2].size(); ++i)
      if (active[k - 2][i]) top = static_cast<int>(i);
    const VineEdge& te = s.edge(k - 1, top);
    bool done = false;
    for (int x : {te.b, te.a}) {
      std::vector<int> chain(k, -1);  // chain[l] edge index at level l
      chain[k - 1] = top;
      std::vector<int> need = te.conditioning;  // complete union of the level below minus x
      bool ok = true;
      for (int l = k - 2; l >= 1 && ok; --l) {
        ok = false;
        for (std::size_t i = 0; i < active[l - 1].size(); ++i) {
          if (!active[l - 1][i]) continue;
          const VineEdge& e = s.edge(l, i);
          if (e.a != x && e.b != x) continue;
          std::vector<int> A = s.complete_union(l, i);
          A.erase(std::find(A.begin(), A.end(), x));
          if (A == need) {
            chain[l] = static_cast<int>(i);
            need = e.conditioning;
            ok = true;
            break;
          }
        }
      }
      if (!ok) continue;
      M[j * d + j] = x;
      for (int l = 1; l <= k - 1; ++l) {
        const VineEdge& e = s.edge(l, chain[l]);
        M[(d - l) * d + j] = e.a == x ? e.b : e.a;
        active[l - 1][chain[l]] = false;
      }
      var_left[x] = false;
      done = true;
      break;
    }
    if (!done) throw std::logic_error("to_matrix: structure could not be peeled");
  }
  for (int v = 1; v <= d; ++v)
    if (var_left[v]) M[(d - 1) * d + (d - 1)] = v;
  return M;
}

RVineStructure from_matrix(std::span<const int> M, int d) {
  if (M.size() != static_cast<std::size_t>(d) * d) throw std::invalid_argument("from_matrix: size mismatch");
  std::vector<int> diag(d);
  for (int j = 0; j < d; ++j) diag[j] = M[j * d + j];
  {
    std::vector<int> sorted = diag;
    std::sort(sorted.begin(), sorted.end());
    for (int v = 1; v <= d; ++v)
      if (sorted[v - 1] != v) throw std::invalid_argument("from_matrix: diagonal is not a permutation of 1..d");
  }
  // edges per level from the columns
  std::vector<std::vector<VineEdge>> raw(d - 1);
  for (int j = 0; j < d - 1; ++j)
    for (int i = j + 1; i < d; ++i) {
      VineEdge e;
      e.tree = d - i;
      e.a = std::min(diag[j], M[i * d + j]);
      e.b = std::max(diag[j], M[i * d + j]);
      if (e.a < 1 || e.b > d || e.a == e.b)
        throw std::invalid_argument("from_matrix: invalid entry in row " + std::to_string(i + 1) +
                                    ", column " + std::to_string(j + 1));
      for (int r = i + 1; r < d; ++r) e.conditioning.push_back(M[r * d + j]);
      std::sort(e.conditioning.begin(), e.conditioning.end());
      raw[e.tree - 1].push_back(std::move(e));
    }
  RVineStructure s(d);
  for (int l = 1; l <= d - 1; ++l) {
    std::vector<VineEdge> edges;
    for (VineEdge e : raw[l - 1]) {
      if (l == 1) {
        e.left = e.a;
        e.right = e.b;
      } else {
        std::vector<int> ua = e.conditioning, ub = e.conditioning;
        ua.insert(std::upper_bound(ua.begin(), ua.end(), e.a), e.a);
        ub.insert(std::upper_bound(ub.begin(), ub.end(), e.b), e.b);
        int pa = -1, pb = -1;
        for (std::size_t i = 0; i < s.tree(l - 1).size(); ++i) {
          const std::vector<int> A = s.complete_union(l - 1, i);
          if (A == ua) pa = static_cast<int>(i);
          if (A == ub) pb = static_cast<int>(i);
        }
        if (pa < 0 || pb < 0)
          throw std::invalid_argument("from_matrix: edge " + e.label() + " has no parent edges in tree " +
                                      std::to_string(l - 1));
        e.left = std::min(pa, pb);
        e.right = std::max(pa, pb);
      }
      edges.push_back(std::move(e));
    }
    s.add_tree(std::move(edges));
  }
  return s;
}

std::vector<std::vector<MatrixCell>> matrix_cells(const RVineStructure& s) {
  const int d = s.dim();
  const std::vector<int> M = to_matrix(s);
  std::vector<std::vector<MatrixCell>> cells(d - 1);
  for (int l = 1; l <= d - 1; ++l) cells[l - 1].resize(s.tree(l).size());
  for (int j = 0; j < d - 1; ++j)
    for (int i = j + 1; i < d; ++i) {
      std::vector<int> D;
      for (int r = i + 1; r < d; ++r) D.push_back(M[r * d + j]);
      const int idx = s.find_edge(d - i, M[j * d + j], M[i * d + j], D);
      cells[d - i - 1][idx] = {i, j};
    }
  return cells;
}

std::string format_matrix(const RVineStructure& s) {
  const int d = s.dim();
  const std::vector<int> M = to_matrix(s);
  std::ostringstream os;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) os << (j ? " " : "") << M[i * d + j];
    os << "\n";
  }
  return os.str();
}

RVineStructure parse_matrix(std::string_view text) {
  std::vector<std::vector<int>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<int> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stoi(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw std::invalid_argument("structure matrix line " + std::to_string(lineno) +
                                    ": not an integer: '" + tok + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const int d = static_cast<int>(rows.size());
  if (d < 2) throw std::invalid_argument("structure matrix needs at least two rows");
  std::vector<int> M(static_cast<std::size_t>(d) * d, 0);
  for (int i = 0; i < d; ++i) {
    if (rows[i].size() != static_cast<std::size_t>(i + 1) && rows[i].size() != static_cast<std::size_t>(d))
      throw std::invalid_argument("structure matrix row " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows[i].size()) + " entries");
    for (int j = 0; j <= i; ++j) M[i * d + j] = rows[i][j];
  }
  return from_matrix(M, d);
}

RVineStructure six_dim_example_structure() {
  // clang-format off
  const std::vector<int> M = {
    3, 0, 0, 0, 0, 0,
    1, 1, 0, 0, 0, 0,
    2, 4, 4, 0, 0, 0,
    4, 5, 2, 2, 0, 0,
    5, 6, 5, 5, 5, 0,
    6, 2, 6, 6, 6, 6,
  };
  // clang-format on
  return from_matrix(M, 6);
}

}  // namespace dynvine
