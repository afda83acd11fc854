#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "dynvine/rng.hpp"
#include "dynvine/vine_structure.hpp"
#include "../support/oracles.hpp"
#include "../support/vine_oracles.hpp"

using namespace dynvine;

TEST_CASE("empirical Kendall's tau") {
  std::vector<double> x = {1, 2, 3}, y = {1, 3, 2};
  CHECK(empirical_kendall_tau(x, y) == doctest::Approx(1.0 / 3.0));
  std::vector<double> inc = {0.1, 0.5, 0.7, 0.9}, dec = {4, 3, 2, 1};
  CHECK(empirical_kendall_tau(inc, inc) == 1.0);
  CHECK(empirical_kendall_tau(inc, dec) == -1.0);
  CHECK_THROWS_AS(empirical_kendall_tau(x, inc), std::invalid_argument);

  Rng rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rep % 60;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse values so that ties occur
      a[i] = std::floor(rng.uniform() * (rep % 3 == 0 ? 5 : 1000));
      b[i] = std::floor((a[i] + rng.normal()) * (rep % 2 == 0 ? 1 : 100));
    }
    CHECK(empirical_kendall_tau(a, b) == doctest::Approx(oracle::kendall_tau_bruteforce(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("six-dimensional example structure") {
  const RVineStructure s = six_dim_example_structure();
  CHECK(validate(s).ok);
  std::set<std::string> t1, t2, t3;
  for (const auto& e : s.tree(1)) t1.insert(e.label());
  for (const auto& e : s.tree(2)) t2.insert(e.label());
  for (const auto& e : s.tree(3)) t3.insert(e.label());
  CHECK(t1 == std::set<std::string>{"1,2", "2,6", "3,6", "4,6", "5,6"});
  CHECK(t2 == std::set<std::string>{"4,5;6", "3,5;6", "2,5;6", "1,6;2"});
  CHECK(t3 == std::set<std::string>{"3,4;5,6", "2,4;5,6", "1,5;2,6"});
  const int i34 = s.find_edge(3, 3, 4, std::vector<int>{5, 6});
  REQUIRE(i34 >= 0);
  CHECK(s.edge(3, i34).conditioning == std::vector<int>{5, 6});
  const int i15 = s.find_edge(3, 1, 5, std::vector<int>{2, 6});
  REQUIRE(i15 >= 0);
  CHECK(s.edge(3, i15).a == 1);
  CHECK(s.edge(3, i15).b == 5);
  CHECK(s.complete_union(3, i15) == std::vector<int>{1, 2, 5, 6});
  for (const auto& e : s.tree(1)) CHECK(e.conditioning.empty());
  CHECK(parse_matrix(format_matrix(s)) == s);
  CHECK(parse_matrix("3\n1 1\n2 4 4\n4 5 2 2\n5 6 5 5 5\n6 2 6 6 6 6\n") == s);
}

TEST_CASE("validation reports violations") {
  RVineStructure two(2);
  two.add_tree({make_edge(two, 1, 1, 2)});
  CHECK(validate(two).ok);

  RVineStructure s(4);
  s.add_tree({make_edge(s, 1, 1, 2), make_edge(s, 1, 2, 3), make_edge(s, 1, 3, 4)});
  // tree 1 edges sorted: (1,2)=0, (2,3)=1, (3,4)=2; nodes 0 and 2 share no variable
  VineEdge bad;
  bad.tree = 2;
  bad.left = 0;
  bad.right = 2;
  bad.a = 1;
  bad.b = 4;
  RVineStructure t = s;
  t.add_tree_unchecked({bad, make_edge(s, 2, 0, 1)});
  const ValidationReport rep = validate(t);
  CHECK_FALSE(rep.ok);
  CHECK(rep.message.find("proximity") != std::string::npos);
  CHECK_THROWS_AS(s.add_tree({bad, make_edge(s, 2, 0, 1)}), std::invalid_argument);

  RVineStructure cyc(3);
  VineEdge e1 = make_edge(cyc, 1, 1, 2), e2 = make_edge(cyc, 1, 1, 2);
  cyc.add_tree_unchecked({e1, e2});
  CHECK_FALSE(validate(cyc).ok);
}

TEST_CASE("allowed edges") {
  RVineStructure s(5);
  CHECK(allowed_edges(s, 1).size() == 10);
  const RVineStructure fig = six_dim_example_structure();
  RVineStructure partial(6);
  partial.add_tree(fig.tree(1));
  const auto cand = allowed_edges(partial, 2);
  bool found_12_26 = false;
  for (const auto& e : cand) {
    const VineEdge& p = partial.edge(1, e.left);
    const VineEdge& q = partial.edge(1, e.right);
    std::set<int> vp = {p.a, p.b}, vq = {q.a, q.b};
    if (vp == std::set<int>{1, 2} && vq == std::set<int>{2, 6}) found_12_26 = true;
    if (vp == std::set<int>{2, 6} && vq == std::set<int>{1, 2}) found_12_26 = true;
    // every candidate joins edges sharing a variable
    std::vector<int> common;
    std::set_intersection(vp.begin(), vp.end(), vq.begin(), vq.end(), std::back_inserter(common));
    CHECK(common.size() == 1);
  }
  CHECK(found_12_26);
  // (1,2) and (3,6) are disjoint; the number of candidates is the number of
  // edge pairs sharing a variable: C(4,2) at hub 6 plus one at variable 2
  CHECK(cand.size() == 7);
}

TEST_CASE("tree selection examples") {
  RVineStructure s(3);
  const auto cand = allowed_edges(s, 1);  // (1,2), (1,3), (2,3)
  const std::vector<double> w = {0.9, 0.5, 0.1};
  auto tree = select_tree(cand, w, 3, StructureClass::General, 1);
  REQUIRE(tree.size() == 2);
  CHECK(tree[0].label() == "1,2");
  CHECK(tree[1].label() == "1,3");
  const std::vector<double> eq = {0.3, 0.3, 0.3};
  tree = select_tree(cand, eq, 3, StructureClass::General, 1);
  CHECK(tree[0].label() == "1,2");
  CHECK(tree[1].label() == "1,3");
  tree = select_tree(cand, w, 3, StructureClass::CVine, 1);
  CHECK(tree[0].label() == "1,2");
  CHECK(tree[1].label() == "1,3");
  // root 3 wins once its sum is the largest
  const std::vector<double> w3 = {0.1, 0.5, 0.9};
  tree = select_tree(cand, w3, 3, StructureClass::CVine, 1);
  CHECK(tree[0].label() == "1,3");
  CHECK(tree[1].label() == "2,3");
  // disconnected candidate graph
  std::vector<VineEdge> one = {cand[0]};
  CHECK_THROWS(select_tree(one, std::vector<double>{1.0}, 3, StructureClass::General, 1));
}

TEST_CASE("maximum spanning tree equals brute force") {
  Rng rng(77);
  for (int rep = 0; rep < 300; ++rep) {
    const int d = 3 + rep % 4;
    RVineStructure s(d);
    const auto cand = allowed_edges(s, 1);
    std::vector<double> w(cand.size());
    for (double& x : w) x = rng.uniform();
    std::vector<std::pair<int, int>> pairs;
    for (const auto& e : cand) pairs.push_back({e.left - 1, e.right - 1});
    double best = -1.0;
    std::set<std::string> best_set;
    oracle::for_each_spanning_tree(d, pairs, [&](const std::vector<std::size_t>& sub) {
      double tot = 0.0;
      for (std::size_t i : sub) tot += w[i];
      if (tot > best) {
        best = tot;
        best_set.clear();
        for (std::size_t i : sub) best_set.insert(cand[i].label());
      }
    });
    std::set<std::string> got;
    for (const auto& e : select_tree(cand, w, d, StructureClass::General, 1)) got.insert(e.label());
    CHECK(got == best_set);
  }
}

TEST_CASE("structure counts") {
  CHECK(count_structures(2) == 1);
  CHECK(count_structures(3) == 3);
  CHECK(count_structures(5) == 480);
  CHECK(count_structures(7) == 2580480);
  for (int d = 2; d <= 5; ++d) CHECK(count_structures(d) == oracle::enumerate_vines(RVineStructure(d)));
  CHECK(count_structures(30) > 0);
}

TEST_CASE("restricted classes") {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 3 + rep % 6;
    const RVineStructure c = oracle::random_structure(d, rng, StructureClass::CVine);
    CHECK(validate(c).ok);
    for (int l = 1; l <= d - 1; ++l) {
      // star: one node touches every edge
      std::map<int, int> deg;
      for (const auto& e : c.tree(l)) {
        ++deg[e.left];
        ++deg[e.right];
      }
      int mx = 0;
      for (auto [k, v] : deg) mx = std::max(mx, v);
      CHECK(mx == static_cast<int>(c.tree(l).size()));
    }
    const RVineStructure dv = oracle::random_structure(d, rng, StructureClass::DVine);
    CHECK(validate(dv).ok);
    std::map<int, int> deg;
    for (const auto& e : dv.tree(1)) {
      ++deg[e.left];
      ++deg[e.right];
    }
    for (auto [k, v] : deg) CHECK(v <= 2);
  }
}

TEST_CASE("matrix form round trip") {
  Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 2 + rep % 8;
    const RVineStructure s = oracle::random_structure(d, rng);
    REQUIRE(validate(s).ok);
    const std::vector<int> M = to_matrix(s);
    CHECK(from_matrix(M, d) == s);
    CHECK(parse_matrix(format_matrix(s)) == s);
    const auto cells = matrix_cells(s);
    std::set<std::pair<int, int>> seen;
    for (int l = 1; l <= d - 1; ++l)
      for (const auto& c : cells[l - 1]) {
        CHECK(c.row == d - l);
        seen.insert({c.row, c.col});
      }
    CHECK(seen.size() == static_cast<std::size_t>(d * (d - 1) / 2));
  }
  CHECK_THROWS_AS(parse_matrix("1\n2 x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_matrix("1\n1 1\n"), std::invalid_argument);
}
