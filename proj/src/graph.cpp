#include "bffg/graph.hpp"

#include <algorithm>
#include <queue>

namespace bffg {

Topology::Topology(int num_vertices, std::vector<Arc> arcs)
    : n_(num_vertices), arcs_(std::move(arcs)) {
  if (n_ <= 0) throw ValidationError("graph: need at least one vertex");
  out_of_.assign(n_, {});
  in_of_.assign(n_, {});

  for (int e = 0; e < static_cast<int>(arcs_.size()); ++e) {
    const Arc& a = arcs_[e];
    if (a.target < 0 || a.target >= n_)
      throw ValidationError("graph: arc target out of range");
    if (a.sources.empty()) throw ValidationError("graph: arc with no source");
    for (VertexId s : a.sources) {
      if (s == a.target) throw ValidationError("graph: self-loop");
      if (s != kRoot && (s < 0 || s >= n_))
        throw ValidationError("graph: arc source out of range");
      if (s == kRoot)
        root_out_.push_back(e);
      else
        out_of_[s].push_back(e);
    }
    if (!in_of_[a.target].empty())
      throw ValidationError("graph: vertex is the target of more than one arc");
    in_of_[a.target].push_back(e);
    if (a.sources.size() > 1) is_tree_ = false;
  }
  for (VertexId v = 0; v < n_; ++v)
    if (in_of_[v].empty())
      throw ValidationError("graph: vertex " + std::to_string(v) + " has no parent");

  // Children-first order over non-root vertices (Kahn), ascending id among
  // simultaneously ready vertices so traversals are reproducible.
  std::vector<int> pending(n_, 0);
  for (VertexId v = 0; v < n_; ++v) pending[v] = static_cast<int>(children(v).size());
  std::priority_queue<VertexId, std::vector<VertexId>, std::greater<VertexId>> ready;
  for (VertexId v = 0; v < n_; ++v)
    if (pending[v] == 0) ready.push(v);
  backward_order_.reserve(n_);
  while (!ready.empty()) {
    VertexId v = ready.top();
    ready.pop();
    backward_order_.push_back(v);
    for (VertexId p : parents(v)) {
      if (p == kRoot) continue;
      if (--pending[p] == 0) ready.push(p);
    }
  }
  if (static_cast<int>(backward_order_.size()) != n_)
    throw ValidationError("graph: cycle detected");
  forward_order_.assign(backward_order_.rbegin(), backward_order_.rend());
}

const std::vector<int>& Topology::out_arcs(VertexId v) const {
  if (v == kRoot) return root_out_;
  return out_of_[v];
}

std::vector<VertexId> Topology::children(VertexId v) const {
  std::vector<VertexId> out;
  for (int e : out_arcs(v)) out.push_back(arcs_[e].target);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VertexId> Topology::parents(VertexId v) const {
  std::vector<VertexId> out;
  for (int e : in_of_[v])
    for (VertexId s : arcs_[e].sources) out.push_back(s);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VertexId> Topology::leaves() const {
  std::vector<VertexId> out;
  for (VertexId v = 0; v < n_; ++v)
    if (is_leaf(v)) out.push_back(v);
  return out;
}

std::vector<VertexId> Topology::leaves_below(VertexId v) const {
  std::vector<VertexId> out;
  std::vector<VertexId> stack{v};
  while (!stack.empty()) {
    VertexId u = stack.back();
    stack.pop_back();
    if (u != kRoot && is_leaf(u)) {
      out.push_back(u);
      continue;
    }
    for (VertexId c : children(u)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace bffg
