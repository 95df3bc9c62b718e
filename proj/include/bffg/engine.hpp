#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bffg/agent_sis.hpp"
#include "bffg/chebyshev.hpp"
#include "bffg/ctmc.hpp"
#include "bffg/dag.hpp"
#include "bffg/finite_state.hpp"
#include "bffg/gamma.hpp"
#include "bffg/gaussian.hpp"
#include "bffg/graph.hpp"
#include "bffg/sde.hpp"

namespace bffg {

using Kernel = std::variant<GaussianKernel, FiniteKernel, ParticleKernel, ParticleObsKernel,
                            SISKernel, SISObsKernel, GammaKernel, FiniteJointKernel, SDEKernel,
                            CTMCKernel, WFKernel, BinomialObsKernel>;

const char* kernel_family_name(const Kernel& k);

struct Edge {
  std::vector<VertexId> sources;
  VertexId target = 0;
  Kernel kernel;
  /* Reference distribution over the joint source configuration, used to split
   * a multi-parent potential into per-parent factors.  Empty = derive the
   * exact push-forward from the root under the comparison kernels. */
  Vec parent_weighting;
};

/* A complete guided-filtering problem: the wiring, one kernel per edge, the
 * pinned root value and the leaf observations.  Construction validates the
 * topology, the state types flowing along every edge, observation placement,
 * and that messages meeting at any vertex share a fusion family. */
class Model {
 public:
  Model() = default;
  Model(std::vector<Edge> edges, State root_state, std::map<VertexId, State> observations);

  const Topology& topology() const { return topo_; }
  int num_vertices() const { return topo_.num_vertices(); }
  int num_arcs() const { return topo_.num_arcs(); }
  const Edge& edge(int e) const { return edges_[e]; }
  const State& root_state() const { return root_; }
  const State& observation(VertexId v) const;
  const std::map<VertexId, State>& observations() const { return obs_; }

 private:
  std::vector<Edge> edges_;
  State root_;
  std::map<VertexId, State> obs_;
  Topology topo_;
};

/* Everything the backward sweep produces: one message per (arc, source) pair,
 * the fused potential per internal vertex, the root potential and its value
 * at the pinned root state, plus the full in-edge representations that the
 * continuous families need for guided simulation. */
struct BackwardPass {
  std::vector<std::vector<Potential>> arc_messages;  // [arc][source position]
  std::vector<Potential> vertex_potential;           // fused; internal vertices only
  Potential root_potential;
  double root_log_value = 0;
  std::vector<std::optional<SDEBackward>> sde;
  std::vector<std::optional<CTMCBackward>> ctmc;
  std::vector<std::optional<WFBackward>> wf;
};

BackwardPass run_backward(const Model& m);

struct WeightLedger {
  double root_log_value = 0;
  Vec arc_log_weight;  // indexed by arc id

  double total() const { return root_log_value + arc_log_weight.sum(); }
};

struct Trajectory {
  std::vector<State> states;  // indexed by vertex id (leaves carry their data)
  WeightLedger ledger;

  /* Realized driving noise / paths per arc, for deterministic replay. */
  std::vector<std::optional<Vec>> gauss_innovations;
  std::vector<std::optional<SDEPath>> sde_paths;
  std::vector<std::optional<WFPath>> wf_paths;
  std::vector<std::optional<CTMCPath>> ctmc_paths;

  double total_log_weight() const { return ledger.total(); }
};

/* Sample the guided process root-to-leaves.  Randomness is split into one
 * deterministic stream per arc from (seed, arc id, replicate), so results do
 * not depend on traversal or evaluation order. */
Trajectory run_forward(const Model& m, const BackwardPass& bp, std::uint64_t seed,
                       std::uint64_t replicate = 0);

/* The standard normal variates that drive one guided forward sweep, stored
 * per arc.  Only families whose guided draw is a deterministic map of
 * Gaussian noise participate (vector and diffusion edges); models containing
 * other random internal edges cannot be replayed this way. */
struct InnovationSet {
  std::vector<std::optional<Vec>> gauss;
  std::vector<std::optional<std::vector<Vec>>> sde;
  std::vector<std::optional<std::vector<double>>> wf;
};

bool model_supports_reparam(const Model& m);

InnovationSet draw_innovations(const Model& m, std::uint64_t seed, std::uint64_t replicate = 0);

/* Deterministic forward sweep driven by the supplied innovations. */
Trajectory run_forward_reparam(const Model& m, const BackwardPass& bp, const InnovationSet& z);

InnovationSet extract_innovations(const Model& m, const Trajectory& t);

struct LikelihoodEstimate {
  double log_estimate = 0;   // log of the Monte Carlo mean of exp(total)
  double rel_std_error = 0;  // SE of the mean divided by the mean
  int replicates = 0;
  Vec sample_log_weights;
  bool degenerate = false;  // every replicate came back with zero weight
};

LikelihoodEstimate estimate_likelihood(const Model& m, const BackwardPass& bp, int n,
                                       std::uint64_t seed);

/* Simulate the unconditional (non-guided) process from the root, including
 * leaf emissions; used to generate synthetic data sets. */
std::vector<State> simulate_unconditional(const Model& m, std::uint64_t seed);

}  // namespace bffg
