#include <algorithm>

#include "bffg/graph.hpp"
#include "doctest.h"

using namespace bffg;

namespace {

Topology line(int n) {
  std::vector<Topology::Arc> arcs;
  arcs.push_back({{kRoot}, 0});
  for (int v = 1; v < n; ++v) arcs.push_back({{v - 1}, v});
  return Topology(n, arcs);
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("line graph basics") {
  Topology t = line(4);
  CHECK(t.num_vertices() == 4);
  CHECK(t.num_arcs() == 4);
  CHECK(t.is_tree());
  CHECK(t.is_leaf(3));
  CHECK_FALSE(t.is_leaf(0));
  CHECK(t.leaves() == std::vector<VertexId>{3});
  CHECK(t.out_arcs(kRoot).size() == 1);
  CHECK(t.in_arcs(2).size() == 1);
  CHECK(t.children(1) == std::vector<VertexId>{2});
  CHECK(t.parents(2) == std::vector<VertexId>{1});
}

TEST_CASE("branching tree orders and leaves_below") {
  // root -> 0, 0 -> {1, 2}, 1 -> {3, 4}
  std::vector<Topology::Arc> arcs = {{{kRoot}, 0}, {{0}, 1}, {{0}, 2}, {{1}, 3}, {{1}, 4}};
  Topology t(5, arcs);
  CHECK(t.is_tree());

  auto lb = t.leaves_below(1);
  std::sort(lb.begin(), lb.end());
  CHECK(lb == std::vector<VertexId>{3, 4});
  auto lr = t.leaves_below(0);
  std::sort(lr.begin(), lr.end());
  CHECK(lr == std::vector<VertexId>{2, 3, 4});
  CHECK(t.leaves_below(4) == std::vector<VertexId>{4});

  // Every vertex appears after all of its children in backward order.
  const auto& bo = t.backward_order();
  REQUIRE(bo.size() == 5);
  std::vector<int> pos(5);
  for (int i = 0; i < 5; ++i) pos[bo[i]] = i;
  for (int v = 0; v < 5; ++v)
    for (VertexId c : t.children(v)) CHECK(pos[c] < pos[v]);

  // Forward order is the exact reverse.
  auto fo = t.forward_order();
  std::reverse(fo.begin(), fo.end());
  CHECK(fo == bo);
}

TEST_CASE("collider arcs") {
  // root -> 0, root -> 1, {0,1} -> 2, 2 -> 3
  std::vector<Topology::Arc> arcs = {{{kRoot}, 0}, {{kRoot}, 1}, {{0, 1}, 2}, {{2}, 3}};
  Topology t(4, arcs);
  CHECK_FALSE(t.is_tree());
  CHECK(t.parents(2) == std::vector<VertexId>{0, 1});
  CHECK(t.out_arcs(kRoot).size() == 2);

  const auto& fo = t.forward_order();
  std::vector<int> pos(4);
  for (int i = 0; i < 4; ++i) pos[fo[i]] = i;
  CHECK(pos[0] < pos[2]);
  CHECK(pos[1] < pos[2]);
  CHECK(pos[2] < pos[3]);
}

TEST_CASE("validation failures") {
  // vertex with two in-arcs
  CHECK_THROWS_AS(Topology(2, {{{kRoot}, 0}, {{kRoot}, 1}, {{0}, 1}}), ValidationError);
  // vertex with no in-arc
  CHECK_THROWS_AS(Topology(2, {{{kRoot}, 0}}), ValidationError);
  // self loop
  CHECK_THROWS_AS(Topology(1, {{{0}, 0}}), ValidationError);
  // cycle through two vertices is impossible with single in-arcs, but a
  // multi-parent cycle is representable and must be rejected
  CHECK_THROWS_AS(Topology(2, {{{kRoot, 1}, 0}, {{0}, 1}}), ValidationError);
  // out-of-range ids
  CHECK_THROWS_AS(Topology(1, {{{kRoot}, 5}}), ValidationError);
  CHECK_THROWS_AS(Topology(2, {{{kRoot}, 0}, {{7}, 1}}), ValidationError);
}

}  // TEST_SUITE
