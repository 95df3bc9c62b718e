#include "bffg/engine.hpp"

#include <algorithm>
#include <set>

namespace bffg {

namespace {

enum class Tag { Int, Double, Vector, IntVec };
enum class Fam { Gauss, Vector, Count, Gamma, Cheb, Particle };

const char* tag_name(Tag t) {
  switch (t) {
    case Tag::Int: return "finite state";
    case Tag::Double: return "scalar";
    case Tag::Vector: return "vector";
    default: return "configuration";
  }
}

const char* fam_name(Fam f) {
  switch (f) {
    case Fam::Gauss: return "gaussian";
    case Fam::Vector: return "finite";
    case Fam::Count: return "count";
    case Fam::Gamma: return "gamma";
    case Fam::Cheb: return "chebyshev";
    default: return "particle";
  }
}

Tag state_tag(const State& s) {
  switch (s.index()) {
    case 0: return Tag::Int;
    case 1: return Tag::Double;
    case 2: return Tag::Vector;
    default: return Tag::IntVec;
  }
}

/* Static shape of a kernel: what flows in and out, which potential family its
 * messages live in, and where it may sit in the graph. */
struct Sig {
  Tag in = Tag::Int;
  Tag out = Tag::Int;
  int in_size = -1;   // cardinality / dimension / particle count; -1 = n/a
  int out_size = -1;
  Fam fam = Fam::Vector;
  bool leaf_only = false;
  bool internal_only = false;
  int cheb_order = -1;
};

Sig kernel_sig(const Kernel& kv) {
  Sig s;
  std::visit(
      [&s](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          s.in = Tag::Vector;
          s.out = Tag::Vector;
          s.in_size = k.dim_in;
          s.out_size = k.dim_out;
          s.fam = Fam::Gauss;
        } else if constexpr (std::is_same_v<T, FiniteKernel>) {
          s.in_size = k.from_states();
          s.out_size = k.to_states();
          s.fam = Fam::Vector;
        } else if constexpr (std::is_same_v<T, ParticleKernel>) {
          s.in = Tag::IntVec;
          s.out = Tag::IntVec;
          s.in_size = k.particles;
          s.out_size = k.particles;
          s.fam = Fam::Particle;
          s.internal_only = true;
        } else if constexpr (std::is_same_v<T, ParticleObsKernel>) {
          s.in = Tag::IntVec;
          s.out = Tag::IntVec;
          s.in_size = static_cast<int>(k.emission.size());
          s.out_size = s.in_size;
          s.fam = Fam::Particle;
          s.leaf_only = true;
        } else if constexpr (std::is_same_v<T, SISKernel>) {
          s.in = Tag::IntVec;
          s.out = Tag::IntVec;
          s.in_size = k.agents();
          s.out_size = k.agents();
          s.fam = Fam::Count;
          s.internal_only = true;
        } else if constexpr (std::is_same_v<T, SISObsKernel>) {
          s.in = Tag::IntVec;
          s.out = Tag::Int;
          s.in_size = k.agents;
          s.out_size = k.agents + 1;
          s.fam = Fam::Count;
          s.leaf_only = true;
        } else if constexpr (std::is_same_v<T, GammaKernel>) {
          s.in = Tag::Double;
          s.out = Tag::Double;
          s.fam = Fam::Gamma;
        } else if constexpr (std::is_same_v<T, FiniteJointKernel>) {
          s.out_size = k.to_states();
          s.fam = Fam::Vector;
        } else if constexpr (std::is_same_v<T, SDEKernel>) {
          s.in = Tag::Vector;
          s.out = Tag::Vector;
          s.in_size = k.dim;
          s.out_size = k.dim;
          s.fam = Fam::Gauss;
          s.internal_only = true;
        } else if constexpr (std::is_same_v<T, CTMCKernel>) {
          s.in_size = k.states();
          s.out_size = k.states();
          s.fam = Fam::Vector;
        } else if constexpr (std::is_same_v<T, WFKernel>) {
          s.in = Tag::Double;
          s.out = Tag::Double;
          s.fam = Fam::Cheb;
          s.internal_only = true;
          s.cheb_order = k.order;
        } else {
          static_assert(std::is_same_v<T, BinomialObsKernel>);
          s.in = Tag::Double;
          s.out = Tag::Int;
          s.out_size = k.trials + 1;
          s.fam = Fam::Cheb;
          s.leaf_only = true;
          s.cheb_order = k.order;
        }
      },
      kv);
  return s;
}

std::string arc_label(const Edge& ed) {
  std::string s = "edge ";
  for (size_t i = 0; i < ed.sources.size(); ++i)
    s += (i ? "," : "") + std::to_string(ed.sources[i]);
  s += "->" + std::to_string(ed.target);
  return s;
}

void check_int_state(const State& st, int size, const std::string& where) {
  int v = std::get<int>(st);
  if (size >= 0 && (v < 0 || v >= size))
    throw ValidationError(where + ": state " + std::to_string(v) + " outside 0.." +
                          std::to_string(size - 1));
}

void check_state_against(const State& st, Tag tag, int size, const std::string& where) {
  if (state_tag(st) != tag)
    throw ValidationError(where + ": expected a " + std::string(tag_name(tag)) + " value, got " +
                          tag_name(state_tag(st)));
  if (tag == Tag::Int) {
    check_int_state(st, size, where);
  } else if (tag == Tag::Vector && size >= 0) {
    if (std::get<Vec>(st).size() != size)
      throw ValidationError(where + ": dimension mismatch");
  } else if (tag == Tag::IntVec && size >= 0) {
    if (static_cast<int>(std::get<std::vector<int>>(st).size()) != size)
      throw ValidationError(where + ": configuration length mismatch");
  }
}

Potential fuse_potentials(const Potential& a, const Potential& b, VertexId v) {
  if (a.index() != b.index())
    throw ValidationError("fusion family mismatch at vertex " + std::to_string(v) + ": " +
                          potential_family_name(a) + " vs " + potential_family_name(b));
  return std::visit(
      [&](const auto& pa) -> Potential {
        using T = std::decay_t<decltype(pa)>;
        const T& pb = std::get<T>(b);
        if constexpr (std::is_same_v<T, GaussianPotential>) {
          return gauss_fuse(pa, pb);
        } else if constexpr (std::is_same_v<T, VectorPotential>) {
          return fs_fuse(pa, pb);
        } else if constexpr (std::is_same_v<T, CountPotential>) {
          return sis_fuse(pa, pb);
        } else if constexpr (std::is_same_v<T, GammaPotential>) {
          return gamma_fuse(pa, pb);
        } else if constexpr (std::is_same_v<T, ChebyshevPotential>) {
          return cheb_fuse(pa, pb);
        } else {
          return particle_fuse(pa, pb);
        }
      },
      a);
}

/* Exact joint law of the arc's source tuple under the comparison kernels,
 * obtained by enumerating every assignment of the finite-state ancestry. */
Vec default_parent_weighting(const Model& m, int arc) {
  const Topology& topo = m.topology();
  const Edge& ed = m.edge(arc);
  const auto& k = std::get<FiniteJointKernel>(ed.kernel);

  std::set<VertexId> closure;
  std::vector<VertexId> stack(ed.sources.begin(), ed.sources.end());
  while (!stack.empty()) {
    VertexId v = stack.back();
    stack.pop_back();
    if (v == kRoot || !closure.insert(v).second) continue;
    for (VertexId s : m.edge(topo.in_arcs(v)[0]).sources) stack.push_back(s);
  }

  std::vector<VertexId> order;
  for (VertexId v : topo.forward_order())
    if (closure.count(v)) order.push_back(v);

  std::vector<int> cards(order.size());
  std::vector<int> pos(m.num_vertices(), -1);
  long long total = 1;
  for (size_t i = 0; i < order.size(); ++i) {
    const Kernel& in_kernel = m.edge(topo.in_arcs(order[i])[0]).kernel;
    Sig sig = kernel_sig(in_kernel);
    bool finite = std::holds_alternative<FiniteKernel>(in_kernel) ||
                  std::holds_alternative<FiniteJointKernel>(in_kernel);
    if (!finite || sig.out != Tag::Int)
      throw ValidationError(arc_label(ed) +
                            ": cannot derive the source distribution through a non-finite "
                            "ancestor; supply parent_weighting explicitly");
    cards[i] = sig.out_size;
    pos[order[i]] = static_cast<int>(i);
    total *= cards[i];
    if (total > (1 << 20))
      throw ValidationError(arc_label(ed) +
                            ": ancestor state space too large to enumerate; supply "
                            "parent_weighting explicitly");
  }

  auto vertex_state = [&](const std::vector<int>& assign, VertexId v) -> int {
    return v == kRoot ? std::get<int>(m.root_state()) : assign[pos[v]];
  };

  Vec out = Vec::Zero(joint_size(k.parent_cards));
  std::vector<int> assign(order.size(), 0);
  for (long long it = 0; it < total; ++it) {
    long long rem = it;
    for (int i = static_cast<int>(order.size()) - 1; i >= 0; --i) {
      assign[i] = static_cast<int>(rem % cards[i]);
      rem /= cards[i];
    }
    double p = 1.0;
    for (size_t i = 0; i < order.size() && p > 0; ++i) {
      const Edge& in_ed = m.edge(topo.in_arcs(order[i])[0]);
      if (const auto* fk = std::get_if<FiniteKernel>(&in_ed.kernel)) {
        p *= fk->aux_trans(vertex_state(assign, in_ed.sources[0]), assign[i]);
      } else {
        const auto& jk = std::get<FiniteJointKernel>(in_ed.kernel);
        std::vector<int> config(in_ed.sources.size());
        for (size_t j = 0; j < in_ed.sources.size(); ++j)
          config[j] = vertex_state(assign, in_ed.sources[j]);
        p *= jk.aux_trans(joint_index(jk.parent_cards, config), assign[i]);
      }
    }
    if (p == 0) continue;
    std::vector<int> src_states(ed.sources.size());
    for (size_t j = 0; j < ed.sources.size(); ++j)
      src_states[j] = vertex_state(assign, ed.sources[j]);
    out[joint_index(k.parent_cards, src_states)] += p;
  }
  double mass = out.sum();
  if (mass <= 0)
    throw NumericError(arc_label(ed) + ": source distribution has no mass under the "
                                       "comparison kernels");
  return out / mass;
}

VectorPotential log_of_linear(const Vec& v) {
  Vec out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? std::log(v[i]) : kNegInf;
  return {out};
}

std::vector<Potential> joint_arc_messages(const Model& m, int arc, const VectorPotential& child,
                                          const FiniteJointKernel& k) {
  const Edge& ed = m.edge(arc);
  VectorPotential joint = dag_joint_pullback(k, child);
  Vec pi;
  if (ed.sources.size() > 1)
    pi = ed.parent_weighting.size() ? ed.parent_weighting : default_parent_weighting(m, arc);
  std::vector<VectorPotential> factors = dag_factorize(k.parent_cards, joint, pi);
  std::vector<Potential> out;
  out.reserve(factors.size());
  for (auto& f : factors) out.emplace_back(std::move(f));
  return out;
}

std::vector<Potential> leaf_messages(const Model& m, int arc, VertexId v, BackwardPass& bp) {
  const Edge& ed = m.edge(arc);
  const State& obs = m.observation(v);
  return std::visit(
      [&](const auto& k) -> std::vector<Potential> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          return {gauss_leaf_message(k, std::get<Vec>(obs))};
        } else if constexpr (std::is_same_v<T, FiniteKernel>) {
          return {fs_leaf_message(k, std::get<int>(obs))};
        } else if constexpr (std::is_same_v<T, ParticleObsKernel>) {
          return {particle_leaf_message(k, std::get<std::vector<int>>(obs))};
        } else if constexpr (std::is_same_v<T, SISObsKernel>) {
          return {sis_leaf_message(k, std::get<int>(obs))};
        } else if constexpr (std::is_same_v<T, GammaKernel>) {
          return {gamma_leaf_message(k, std::get<double>(obs))};
        } else if constexpr (std::is_same_v<T, BinomialObsKernel>) {
          return {wf_leaf_message(k, std::get<int>(obs))};
        } else if constexpr (std::is_same_v<T, CTMCKernel>) {
          CTMCBackward b = ctmc_solve_backward(k, fs_unit(std::get<int>(obs), k.states()));
          VectorPotential msg = log_of_linear(b.grid_g[0]);
          bp.ctmc[arc] = std::move(b);
          return {std::move(msg)};
        } else if constexpr (std::is_same_v<T, FiniteJointKernel>) {
          return joint_arc_messages(m, arc, fs_unit(std::get<int>(obs), k.to_states()), k);
        } else {
          throw ValidationError(arc_label(ed) + ": family cannot terminate at a leaf");
        }
      },
      ed.kernel);
}

std::vector<Potential> pullback_messages(const Model& m, int arc, const Potential& g,
                                         BackwardPass& bp) {
  const Edge& ed = m.edge(arc);
  return std::visit(
      [&](const auto& k) -> std::vector<Potential> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          return {gauss_pullback(k, std::get<GaussianPotential>(g))};
        } else if constexpr (std::is_same_v<T, FiniteKernel>) {
          return {fs_pullback(k, std::get<VectorPotential>(g))};
        } else if constexpr (std::is_same_v<T, ParticleKernel>) {
          return {particle_pullback(k, std::get<ParticlePotential>(g))};
        } else if constexpr (std::is_same_v<T, SISKernel>) {
          return {sis_pullback(k, std::get<CountPotential>(g))};
        } else if constexpr (std::is_same_v<T, GammaKernel>) {
          return {gamma_pullback(k, std::get<GammaPotential>(g))};
        } else if constexpr (std::is_same_v<T, FiniteJointKernel>) {
          return joint_arc_messages(m, arc, std::get<VectorPotential>(g), k);
        } else if constexpr (std::is_same_v<T, SDEKernel>) {
          SDEBackward b = sde_solve_backward(k, std::get<GaussianPotential>(g));
          GaussianPotential msg = sde_message(b);
          bp.sde[arc] = std::move(b);
          return {std::move(msg)};
        } else if constexpr (std::is_same_v<T, CTMCKernel>) {
          CTMCBackward b = ctmc_solve_backward(k, std::get<VectorPotential>(g));
          VectorPotential msg = log_of_linear(b.grid_g[0]);
          bp.ctmc[arc] = std::move(b);
          return {std::move(msg)};
        } else if constexpr (std::is_same_v<T, WFKernel>) {
          WFBackward b = wf_solve_backward(k, std::get<ChebyshevPotential>(g));
          ChebyshevPotential msg = wf_message(b);
          bp.wf[arc] = std::move(b);
          return {std::move(msg)};
        } else {
          throw ValidationError(arc_label(ed) + ": observation kernel on an internal edge");
        }
      },
      ed.kernel);
}

}  // namespace

const char* kernel_family_name(const Kernel& k) {
  return std::visit(
      [](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) return "gaussian";
        else if constexpr (std::is_same_v<T, FiniteKernel>) return "finite";
        else if constexpr (std::is_same_v<T, ParticleKernel>) return "particle";
        else if constexpr (std::is_same_v<T, ParticleObsKernel>) return "particle_obs";
        else if constexpr (std::is_same_v<T, SISKernel>) return "sis";
        else if constexpr (std::is_same_v<T, SISObsKernel>) return "sis_obs";
        else if constexpr (std::is_same_v<T, GammaKernel>) return "gamma";
        else if constexpr (std::is_same_v<T, FiniteJointKernel>) return "finite_joint";
        else if constexpr (std::is_same_v<T, SDEKernel>) return "sde";
        else if constexpr (std::is_same_v<T, CTMCKernel>) return "ctmc";
        else if constexpr (std::is_same_v<T, WFKernel>) return "wf";
        else return "binomial_obs";
      },
      k);
}

Model::Model(std::vector<Edge> edges, State root_state, std::map<VertexId, State> observations)
    : edges_(std::move(edges)), root_(std::move(root_state)), obs_(std::move(observations)) {
  int n = 0;
  std::vector<Topology::Arc> arcs;
  arcs.reserve(edges_.size());
  for (const Edge& ed : edges_) {
    n = std::max(n, ed.target + 1);
    for (VertexId s : ed.sources) n = std::max(n, s + 1);
    arcs.push_back({ed.sources, ed.target});
  }
  topo_ = Topology(n, std::move(arcs));

  for (VertexId v : topo_.leaves())
    if (!obs_.count(v))
      throw ValidationError("leaf " + std::to_string(v) + " has no observation");
  for (const auto& [v, st] : obs_) {
    (void)st;
    if (v < 0 || v >= n || !topo_.is_leaf(v))
      throw ValidationError("observation attached to non-leaf vertex " + std::to_string(v));
  }

  // target spec of the arc feeding each vertex, for source checks below
  std::vector<Sig> in_sig(n);
  for (int v = 0; v < n; ++v) in_sig[v] = kernel_sig(edges_[topo_.in_arcs(v)[0]].kernel);

  for (int e = 0; e < topo_.num_arcs(); ++e) {
    const Edge& ed = edges_[e];
    const std::string label = arc_label(ed);
    Sig sig = kernel_sig(ed.kernel);
    bool leaf = topo_.is_leaf(ed.target);
    const auto* joint = std::get_if<FiniteJointKernel>(&ed.kernel);

    if (ed.sources.size() > 1) {
      if (!joint)
        throw ValidationError(label + ": multiple sources require a finite_joint kernel");
      std::set<VertexId> uniq(ed.sources.begin(), ed.sources.end());
      if (uniq.size() != ed.sources.size())
        throw ValidationError(label + ": duplicate source vertex");
      if (uniq.count(kRoot))
        throw ValidationError(label + ": the root cannot join a multi-source edge");
    }
    if (joint && joint->parent_cards.size() != ed.sources.size())
      throw ValidationError(label + ": parent cardinality list does not match source count");
    if (sig.leaf_only && !leaf)
      throw ValidationError(label + ": observation kernel must target a leaf");
    if (sig.internal_only && leaf)
      throw ValidationError(label + ": family cannot terminate at a leaf");

    for (size_t i = 0; i < ed.sources.size(); ++i) {
      Tag want_tag = joint ? Tag::Int : sig.in;
      int want_size = joint ? joint->parent_cards[i] : sig.in_size;
      VertexId s = ed.sources[i];
      std::string where = label + " source " + std::to_string(s);
      if (s == kRoot) {
        check_state_against(root_, want_tag, want_size, where + " (root value)");
      } else {
        if (in_sig[s].out != want_tag)
          throw ValidationError(where + ": carries " + tag_name(in_sig[s].out) +
                                " but the kernel consumes " + tag_name(want_tag));
        if (want_size >= 0 && in_sig[s].out_size >= 0 && in_sig[s].out_size != want_size)
          throw ValidationError(where + ": size " + std::to_string(in_sig[s].out_size) +
                                " does not match kernel input size " +
                                std::to_string(want_size));
      }
    }

    if (leaf) {
      check_state_against(obs_.at(ed.target), sig.out, sig.out_size,
                          label + " observation at " + std::to_string(ed.target));
      if (const auto* pk = std::get_if<ParticleObsKernel>(&ed.kernel)) {
        const auto& o = std::get<std::vector<int>>(obs_.at(ed.target));
        for (size_t i = 0; i < o.size(); ++i)
          if (o[i] < 0 || o[i] >= pk->emission[i].cols())
            throw ValidationError(label + ": particle observation out of range");
      }
    }
  }

  // fusion compatibility: all messages meeting at a vertex share one family
  auto check_fusion = [&](VertexId v) {
    const auto& outs = topo_.out_arcs(v);
    if (outs.empty()) return;
    Sig first = kernel_sig(edges_[outs[0]].kernel);
    for (int e : outs) {
      Sig s = kernel_sig(edges_[e].kernel);
      if (s.fam != first.fam)
        throw ValidationError("vertex " + std::to_string(v) + " fuses " + fam_name(first.fam) +
                              " and " + fam_name(s.fam) + " messages");
      if (s.fam == Fam::Cheb && s.cheb_order != first.cheb_order)
        throw ValidationError("vertex " + std::to_string(v) + " fuses polynomial messages of "
                              "different basis orders");
    }
    if (outs.size() > 1 && (first.fam == Fam::Gamma || first.fam == Fam::Cheb))
      throw ValidationError("vertex " + std::to_string(v) + ": " + fam_name(first.fam) +
                            " potentials do not support branching (their product leaves the "
                            "family)");
    if (v != kRoot) {
      Sig in = in_sig[v];
      if (in.fam != first.fam)
        throw ValidationError("vertex " + std::to_string(v) + ": incoming edge transports " +
                              fam_name(in.fam) + " but children produce " + fam_name(first.fam));
      if (in.fam == Fam::Cheb && in.cheb_order != first.cheb_order)
        throw ValidationError("vertex " + std::to_string(v) +
                              ": polynomial basis order changes across the vertex");
    }
  };
  check_fusion(kRoot);
  for (int v = 0; v < n; ++v)
    if (!topo_.is_leaf(v)) check_fusion(v);
}

const State& Model::observation(VertexId v) const {
  auto it = obs_.find(v);
  if (it == obs_.end())
    throw ValidationError("no observation at vertex " + std::to_string(v));
  return it->second;
}

BackwardPass run_backward(const Model& m) {
  const Topology& topo = m.topology();
  const int na = m.num_arcs();
  BackwardPass bp;
  bp.arc_messages.resize(na);
  bp.vertex_potential.assign(m.num_vertices(), Potential{GaussianPotential{}});
  bp.sde.resize(na);
  bp.ctmc.resize(na);
  bp.wf.resize(na);

  auto message_at = [&](int e, VertexId v) -> const Potential& {
    const Edge& ed = m.edge(e);
    for (size_t i = 0; i < ed.sources.size(); ++i)
      if (ed.sources[i] == v) return bp.arc_messages[e][i];
    throw ValidationError("vertex " + std::to_string(v) + " is not a source of its out-edge");
  };

  auto fused_at = [&](VertexId v) -> Potential {
    const auto& outs = topo.out_arcs(v);
    Potential acc = message_at(outs[0], v);
    for (size_t i = 1; i < outs.size(); ++i)
      acc = fuse_potentials(acc, message_at(outs[i], v), v);
    return acc;
  };

  for (VertexId v : topo.backward_order()) {
    int e = topo.in_arcs(v)[0];
    if (topo.is_leaf(v)) {
      bp.arc_messages[e] = leaf_messages(m, e, v, bp);
    } else {
      Potential g = fused_at(v);
      bp.arc_messages[e] = pullback_messages(m, e, g, bp);
      bp.vertex_potential[v] = std::move(g);
    }
  }

  Potential root_g = fused_at(kRoot);
  bp.root_log_value = potential_log_eval(root_g, m.root_state());
  bp.root_potential = std::move(root_g);
  return bp;
}

namespace {

/* One guided forward sweep.  Randomness comes either from per-arc streams
 * derived from (seed, arc, replicate) or, when `given` is set, from the
 * supplied innovations (families without a Gaussian driving representation
 * reject the latter). */
Trajectory forward_impl(const Model& m, const BackwardPass& bp, std::uint64_t seed,
                        std::uint64_t replicate, const InnovationSet* given) {
  const Topology& topo = m.topology();
  const int na = m.num_arcs();
  Trajectory t;
  t.states.resize(m.num_vertices());
  t.ledger.root_log_value = bp.root_log_value;
  t.ledger.arc_log_weight = Vec::Zero(na);
  t.gauss_innovations.resize(na);
  t.sde_paths.resize(na);
  t.wf_paths.resize(na);
  t.ctmc_paths.resize(na);

  auto src_state = [&](VertexId s) -> const State& {
    return s == kRoot ? m.root_state() : t.states[s];
  };

  for (VertexId v : topo.forward_order()) {
    int e = topo.in_arcs(v)[0];
    const Edge& ed = m.edge(e);
    bool leaf = topo.is_leaf(v);
    double w = 0;

    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianKernel>) {
            const Vec& x = std::get<Vec>(src_state(ed.sources[0]));
            const auto& msg = std::get<GaussianPotential>(bp.arc_messages[e][0]);
            if (leaf) {
              const Vec& obs = std::get<Vec>(m.observation(v));
              t.states[v] = obs;
              w = gauss_leaf_log_weight(k, obs, msg, x);
            } else {
              const auto& g = std::get<GaussianPotential>(bp.vertex_potential[v]);
              Vec z(k.dim_out);
              if (given) {
                if (!given->gauss[e] || given->gauss[e]->size() != k.dim_out)
                  throw ValidationError(arc_label(ed) + ": missing or misshaped innovations");
                z = *given->gauss[e];
              } else {
                Rng rng = make_rng(seed, e, replicate);
                for (int i = 0; i < z.size(); ++i) z[i] = draw_normal(rng);
              }
              t.states[v] = gauss_guided_sample_reparam(k, g, x, z);
              t.gauss_innovations[e] = std::move(z);
              w = gauss_log_weight(k, g, msg, x);
            }
          } else if constexpr (std::is_same_v<T, FiniteKernel>) {
            int x = std::get<int>(src_state(ed.sources[0]));
            const auto& msg = std::get<VectorPotential>(bp.arc_messages[e][0]);
            if (leaf) {
              int obs = std::get<int>(m.observation(v));
              t.states[v] = obs;
              w = fs_leaf_log_weight(k, obs, msg, x);
            } else {
              if (given)
                throw ValidationError(arc_label(ed) +
                                      ": finite edges have no innovation representation");
              const auto& g = std::get<VectorPotential>(bp.vertex_potential[v]);
              Rng rng = make_rng(seed, e, replicate);
              t.states[v] = fs_guided_sample(k, g, x, rng);
              w = fs_log_weight(k, g, msg, x);
            }
          } else if constexpr (std::is_same_v<T, FiniteJointKernel>) {
            std::vector<int> ps(ed.sources.size());
            for (size_t i = 0; i < ed.sources.size(); ++i)
              ps[i] = std::get<int>(src_state(ed.sources[i]));
            std::vector<VectorPotential> factors;
            factors.reserve(bp.arc_messages[e].size());
            for (const Potential& p : bp.arc_messages[e])
              factors.push_back(std::get<VectorPotential>(p));
            VectorPotential g = leaf ? fs_unit(std::get<int>(m.observation(v)), k.to_states())
                                     : std::get<VectorPotential>(bp.vertex_potential[v]);
            if (leaf) {
              t.states[v] = std::get<int>(m.observation(v));
            } else {
              if (given)
                throw ValidationError(arc_label(ed) +
                                      ": finite edges have no innovation representation");
              Rng rng = make_rng(seed, e, replicate);
              t.states[v] = dag_guided_sample(k, g, ps, rng);
            }
            w = dag_log_weight(k, g, factors, ps);
          } else if constexpr (std::is_same_v<T, ParticleObsKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            const auto& msg = std::get<ParticlePotential>(bp.arc_messages[e][0]);
            const auto& obs = std::get<std::vector<int>>(m.observation(v));
            t.states[v] = obs;
            w = particle_leaf_log_weight(k, obs, msg, x);
          } else if constexpr (std::is_same_v<T, ParticleKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            const auto& msg = std::get<ParticlePotential>(bp.arc_messages[e][0]);
            if (given)
              throw ValidationError(arc_label(ed) +
                                    ": particle edges have no innovation representation");
            const auto& g = std::get<ParticlePotential>(bp.vertex_potential[v]);
            Rng rng = make_rng(seed, e, replicate);
            t.states[v] = particle_guided_sample(k, g, x, rng);
            w = particle_log_weight(k, g, msg, x);
          } else if constexpr (std::is_same_v<T, SISKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            const auto& msg = std::get<CountPotential>(bp.arc_messages[e][0]);
            if (given)
              throw ValidationError(arc_label(ed) +
                                    ": epidemic edges have no innovation representation");
            const auto& g = std::get<CountPotential>(bp.vertex_potential[v]);
            Rng rng = make_rng(seed, e, replicate);
            t.states[v] = sis_guided_sample(k, g, x, rng);
            w = sis_log_weight(k, g, msg, x);
          } else if constexpr (std::is_same_v<T, SISObsKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            const auto& msg = std::get<CountPotential>(bp.arc_messages[e][0]);
            int obs = std::get<int>(m.observation(v));
            t.states[v] = obs;
            w = sis_leaf_log_weight(k, obs, msg, x);
          } else if constexpr (std::is_same_v<T, GammaKernel>) {
            double x = std::get<double>(src_state(ed.sources[0]));
            const auto& msg = std::get<GammaPotential>(bp.arc_messages[e][0]);
            if (leaf) {
              double obs = std::get<double>(m.observation(v));
              t.states[v] = obs;
              w = gamma_leaf_log_weight(k, obs, msg, x);
            } else {
              if (given)
                throw ValidationError(arc_label(ed) +
                                      ": subordinator edges have no innovation representation");
              const auto& g = std::get<GammaPotential>(bp.vertex_potential[v]);
              Rng rng = make_rng(seed, e, replicate);
              t.states[v] = gamma_guided_sample(k, g, x, rng);
              w = gamma_log_weight(k, g, x);
            }
          } else if constexpr (std::is_same_v<T, SDEKernel>) {
            const Vec& x = std::get<Vec>(src_state(ed.sources[0]));
            const SDEBackward& b = *bp.sde[e];
            std::vector<Vec> zs;
            if (given) {
              if (!given->sde[e] ||
                  static_cast<int>(given->sde[e]->size()) != k.grid_steps())
                throw ValidationError(arc_label(ed) + ": missing or misshaped innovations");
              zs = *given->sde[e];
            } else {
              Rng rng = make_rng(seed, e, replicate);
              zs.resize(k.grid_steps());
              for (auto& z : zs) {
                z.resize(k.wdim);
                for (int i = 0; i < k.wdim; ++i) z[i] = draw_normal(rng);
              }
            }
            SDEPath path = sde_guided_simulate_reparam(k, b, x, zs);
            t.states[v] = path.states.back();
            w = sde_log_weight(k, b, path);
            t.sde_paths[e] = std::move(path);
          } else if constexpr (std::is_same_v<T, CTMCKernel>) {
            int x = std::get<int>(src_state(ed.sources[0]));
            if (leaf) {
              const auto& msg = std::get<VectorPotential>(bp.arc_messages[e][0]);
              int obs = std::get<int>(m.observation(v));
              t.states[v] = obs;
              w = ctmc_leaf_log_weight(k, obs, msg, x);
            } else {
              if (given)
                throw ValidationError(arc_label(ed) +
                                      ": jump edges have no innovation representation");
              const CTMCBackward& b = *bp.ctmc[e];
              Rng rng = make_rng(seed, e, replicate);
              CTMCPath path = ctmc_guided_simulate(k, b, x, rng);
              t.states[v] = path.end_state();
              w = ctmc_log_weight(k, b, path);
              t.ctmc_paths[e] = std::move(path);
            }
          } else if constexpr (std::is_same_v<T, WFKernel>) {
            double x = std::get<double>(src_state(ed.sources[0]));
            const WFBackward& b = *bp.wf[e];
            std::vector<double> zs;
            if (given) {
              if (!given->wf[e] || static_cast<int>(given->wf[e]->size()) != k.grid_steps())
                throw ValidationError(arc_label(ed) + ": missing or misshaped innovations");
              zs = *given->wf[e];
            } else {
              Rng rng = make_rng(seed, e, replicate);
              zs.resize(k.grid_steps());
              for (auto& z : zs) z = draw_normal(rng);
            }
            WFPath path = wf_guided_simulate_reparam(k, b, x, zs);
            t.states[v] = path.states.back();
            // the polynomial potential solves the backward equation of the
            // forward process itself, so the local mismatch vanishes
            w = 0.0;
            t.wf_paths[e] = std::move(path);
          } else {
            static_assert(std::is_same_v<T, BinomialObsKernel>);
            double x = std::get<double>(src_state(ed.sources[0]));
            const auto& msg = std::get<ChebyshevPotential>(bp.arc_messages[e][0]);
            int obs = std::get<int>(m.observation(v));
            t.states[v] = obs;
            w = wf_leaf_log_weight(k, obs, msg, x);
          }
        },
        ed.kernel);

    t.ledger.arc_log_weight[e] = w;
  }
  return t;
}

}  // namespace

Trajectory run_forward(const Model& m, const BackwardPass& bp, std::uint64_t seed,
                       std::uint64_t replicate) {
  return forward_impl(m, bp, seed, replicate, nullptr);
}

bool model_supports_reparam(const Model& m) {
  for (int e = 0; e < m.num_arcs(); ++e) {
    if (m.topology().is_leaf(m.edge(e).target)) continue;
    const Kernel& k = m.edge(e).kernel;
    if (!std::holds_alternative<GaussianKernel>(k) && !std::holds_alternative<SDEKernel>(k) &&
        !std::holds_alternative<WFKernel>(k))
      return false;
  }
  return true;
}

InnovationSet draw_innovations(const Model& m, std::uint64_t seed, std::uint64_t replicate) {
  const int na = m.num_arcs();
  InnovationSet z;
  z.gauss.resize(na);
  z.sde.resize(na);
  z.wf.resize(na);
  for (int e = 0; e < na; ++e) {
    if (m.topology().is_leaf(m.edge(e).target)) continue;
    const Kernel& kv = m.edge(e).kernel;
    if (const auto* k = std::get_if<GaussianKernel>(&kv)) {
      Rng rng = make_rng(seed, e, replicate);
      Vec v(k->dim_out);
      for (int i = 0; i < v.size(); ++i) v[i] = draw_normal(rng);
      z.gauss[e] = std::move(v);
    } else if (const auto* ks = std::get_if<SDEKernel>(&kv)) {
      Rng rng = make_rng(seed, e, replicate);
      std::vector<Vec> vs(ks->grid_steps());
      for (auto& v : vs) {
        v.resize(ks->wdim);
        for (int i = 0; i < ks->wdim; ++i) v[i] = draw_normal(rng);
      }
      z.sde[e] = std::move(vs);
    } else if (const auto* kw = std::get_if<WFKernel>(&kv)) {
      Rng rng = make_rng(seed, e, replicate);
      std::vector<double> vs(kw->grid_steps());
      for (auto& v : vs) v = draw_normal(rng);
      z.wf[e] = std::move(vs);
    }
  }
  return z;
}

Trajectory run_forward_reparam(const Model& m, const BackwardPass& bp, const InnovationSet& z) {
  if (static_cast<int>(z.gauss.size()) != m.num_arcs() ||
      static_cast<int>(z.sde.size()) != m.num_arcs() ||
      static_cast<int>(z.wf.size()) != m.num_arcs())
    throw ValidationError("run_forward_reparam: innovation set not sized for this model");
  return forward_impl(m, bp, 0, 0, &z);
}

InnovationSet extract_innovations(const Model& m, const Trajectory& t) {
  const int na = m.num_arcs();
  InnovationSet z;
  z.gauss.resize(na);
  z.sde.resize(na);
  z.wf.resize(na);
  for (int e = 0; e < na; ++e) {
    if (t.gauss_innovations[e]) z.gauss[e] = *t.gauss_innovations[e];
    if (t.sde_paths[e]) z.sde[e] = t.sde_paths[e]->innovations;
    if (t.wf_paths[e]) z.wf[e] = t.wf_paths[e]->innovations;
  }
  return z;
}

LikelihoodEstimate estimate_likelihood(const Model& m, const BackwardPass& bp, int n,
                                       std::uint64_t seed) {
  if (n < 1) throw ValidationError("estimate_likelihood: need at least one replicate");
  LikelihoodEstimate est;
  est.replicates = n;
  est.sample_log_weights.resize(n);
  for (int i = 0; i < n; ++i)
    est.sample_log_weights[i] = run_forward(m, bp, seed, i).total_log_weight();

  double mx = est.sample_log_weights.maxCoeff();
  if (mx == kNegInf) {
    est.log_estimate = kNegInf;
    est.rel_std_error = 0;
    est.degenerate = true;
    return est;
  }
  Vec a = (est.sample_log_weights.array() - mx).exp();
  double mean = a.mean();
  est.log_estimate = mx + std::log(mean);
  if (n > 1) {
    double var = (a.array() - mean).square().sum() / (n - 1);
    est.rel_std_error = std::sqrt(var / n) / mean;
  }
  return est;
}

namespace {

Vec mvn_draw(Rng& rng, const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("simulate: covariance not positive definite");
  Vec z(mean.size());
  for (int i = 0; i < z.size(); ++i) z[i] = draw_normal(rng);
  return mean + llt.matrixL() * z;
}

int binomial_draw(Rng& rng, int n, double p) {
  int c = 0;
  for (int i = 0; i < n; ++i)
    if (draw_uniform(rng) < p) ++c;
  return c;
}

}  // namespace

std::vector<State> simulate_unconditional(const Model& m, std::uint64_t seed) {
  const Topology& topo = m.topology();
  std::vector<State> states(m.num_vertices());
  auto src_state = [&](VertexId s) -> const State& {
    return s == kRoot ? m.root_state() : states[s];
  };

  for (VertexId v : topo.forward_order()) {
    int e = topo.in_arcs(v)[0];
    const Edge& ed = m.edge(e);
    Rng rng = make_rng(seed, e, 0);
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianKernel>) {
            const Vec& x = std::get<Vec>(src_state(ed.sources[0]));
            states[v] = mvn_draw(rng, k.mean(x), k.cov(x));
          } else if constexpr (std::is_same_v<T, FiniteKernel>) {
            int x = std::get<int>(src_state(ed.sources[0]));
            states[v] = draw_categorical(rng, k.trans.row(x).transpose());
          } else if constexpr (std::is_same_v<T, FiniteJointKernel>) {
            std::vector<int> ps(ed.sources.size());
            for (size_t i = 0; i < ed.sources.size(); ++i)
              ps[i] = std::get<int>(src_state(ed.sources[i]));
            int row = joint_index(k.parent_cards, ps);
            states[v] = draw_categorical(rng, k.trans.row(row).transpose());
          } else if constexpr (std::is_same_v<T, CTMCKernel>) {
            int x = std::get<int>(src_state(ed.sources[0]));
            double u = 0;
            while (true) {
              double exit = -k.rates(x, x);
              if (exit <= 0) break;
              u += draw_exponential(rng, exit);
              if (u >= k.tau) break;
              Vec jump = k.rates.row(x).transpose();
              jump[x] = 0;
              x = draw_categorical(rng, jump);
            }
            states[v] = x;
          } else if constexpr (std::is_same_v<T, SISKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            Vec p = sis_flip_probs(k, x);
            std::vector<int> y(x.size());
            for (size_t i = 0; i < y.size(); ++i) y[i] = draw_uniform(rng) < p[i] ? 1 : 0;
            states[v] = std::move(y);
          } else if constexpr (std::is_same_v<T, SISObsKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            states[v] = binomial_draw(rng, sis_infected_count(x), k.report_prob);
          } else if constexpr (std::is_same_v<T, ParticleKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            std::vector<int> y(x.size());
            for (int i = 0; i < k.particles; ++i) {
              Mat ki = k.trans(i, x);
              y[i] = draw_categorical(rng, ki.row(x[i]).transpose());
            }
            states[v] = std::move(y);
          } else if constexpr (std::is_same_v<T, ParticleObsKernel>) {
            const auto& x = std::get<std::vector<int>>(src_state(ed.sources[0]));
            std::vector<int> y(x.size());
            for (size_t i = 0; i < x.size(); ++i)
              y[i] = draw_categorical(rng, k.emission[i].row(x[i]).transpose());
            states[v] = std::move(y);
          } else if constexpr (std::is_same_v<T, GammaKernel>) {
            double x = std::get<double>(src_state(ed.sources[0]));
            states[v] = x + draw_gamma(rng, k.shape, k.rate(x));
          } else if constexpr (std::is_same_v<T, SDEKernel>) {
            Vec x = std::get<Vec>(src_state(ed.sources[0]));
            int steps = k.grid_steps();
            double dt = k.tau / steps;
            for (int i = 0; i < steps; ++i) {
              double u = k.tau * i / steps;
              Vec z(k.wdim);
              for (int j = 0; j < k.wdim; ++j) z[j] = draw_normal(rng);
              x += k.drift(u, x) * dt + k.dispersion(u, x) * (std::sqrt(dt) * z);
            }
            states[v] = std::move(x);
          } else if constexpr (std::is_same_v<T, WFKernel>) {
            double x = std::get<double>(src_state(ed.sources[0]));
            int steps = k.grid_steps();
            double dt = k.tau / steps;
            for (int i = 0; i < steps; ++i) {
              double drift = k.mut0 * (1.0 - x) + k.mut1 * x;
              x += drift * dt + std::sqrt(std::max(0.0, x * (1.0 - x)) * dt) * draw_normal(rng);
              x = std::min(1.0 - k.clamp_eps, std::max(k.clamp_eps, x));
            }
            states[v] = x;
          } else {
            static_assert(std::is_same_v<T, BinomialObsKernel>);
            double x = std::get<double>(src_state(ed.sources[0]));
            states[v] = binomial_draw(rng, k.trials, x);
          }
        },
        ed.kernel);
  }
  return states;
}

}  // namespace bffg
