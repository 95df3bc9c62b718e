#pragma once

#include <vector>

#include "bffg/numeric.hpp"

namespace bffg {

using VertexId = int;

/* The root is addressable but sits outside the 0..n-1 vertex range; its value
 * is pinned by the model and it is excluded from traversal orders. */
inline constexpr VertexId kRoot = -1;

/* Pure topology of the directed graph: edges from one or more source vertices
 * (all but the root's out-edges have the root excluded as a target) to a
 * single target.  Tree edges have one source; collider edges may have
 * several.  Construction validates acyclicity and parent counts; traversal
 * orders are deterministic with ties broken by ascending vertex id. */
class Topology {
 public:
  struct Arc {
    std::vector<VertexId> sources;
    VertexId target = 0;
  };

  Topology() = default;
  Topology(int num_vertices, std::vector<Arc> arcs);

  int num_vertices() const { return n_; }
  int num_arcs() const { return static_cast<int>(arcs_.size()); }
  const Arc& arc(int e) const { return arcs_[e]; }

  /* Arc ids leaving / entering a vertex (kRoot allowed for out-arcs). */
  const std::vector<int>& out_arcs(VertexId v) const;
  const std::vector<int>& in_arcs(VertexId v) const { return in_of_[v]; }

  std::vector<VertexId> children(VertexId v) const;
  std::vector<VertexId> parents(VertexId v) const;

  bool is_leaf(VertexId v) const { return out_of_[v].empty(); }
  std::vector<VertexId> leaves() const;

  /* Leaves of the subtree reachable from v (v itself if a leaf). */
  std::vector<VertexId> leaves_below(VertexId v) const;

  /* Non-root vertices ordered so every vertex appears after all of its
   * children; deterministic (ascending id among ready vertices). */
  const std::vector<VertexId>& backward_order() const { return backward_order_; }

  /* Reverse of backward_order: every vertex after all of its parents. */
  const std::vector<VertexId>& forward_order() const { return forward_order_; }

  bool is_tree() const { return is_tree_; }

 private:
  int n_ = 0;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> out_of_;  // index by vertex id
  std::vector<int> root_out_;             // out-arcs of the root
  std::vector<std::vector<int>> in_of_;
  std::vector<VertexId> backward_order_;
  std::vector<VertexId> forward_order_;
  bool is_tree_ = true;
};

}  // namespace bffg
