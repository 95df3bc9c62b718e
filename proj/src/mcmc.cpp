#include "bffg/mcmc.hpp"

namespace bffg {

namespace {

bool accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0) return true;
  return std::log(draw_uniform(rng)) < log_ratio;
}

/* Rebuild model + backward pass under theta and push the innovations through.
 * Returns false (leaving out untouched) when theta is rejected by the factory
 * or produces a non-finite weight. */
bool try_remap(const ModelFactory& factory, const Vec& theta, const InnovationSet& z,
               ChainState& out) {
  Model m;
  try {
    m = factory(theta);
  } catch (const ValidationError&) {
    return false;
  } catch (const NumericError&) {
    return false;
  }
  BackwardPass bp;
  Trajectory t;
  try {
    bp = run_backward(m);
    t = run_forward_reparam(m, bp, z);
  } catch (const NumericError&) {
    return false;
  }
  double psi = t.total_log_weight();
  if (!std::isfinite(psi)) return false;
  out.theta = theta;
  out.z = z;
  out.model = std::move(m);
  out.backward = std::move(bp);
  out.trajectory = std::move(t);
  out.log_psi = psi;
  return true;
}

}  // namespace

ChainState make_chain_state(const ModelFactory& factory, const Vec& theta, std::uint64_t seed) {
  ChainState s;
  s.model = factory(theta);
  if (!model_supports_reparam(s.model))
    throw ValidationError(
        "make_chain_state: the model has random internal edges without an innovation "
        "representation, so innovations cannot serve as the chain state");
  s.theta = theta;
  s.backward = run_backward(s.model);
  s.z = draw_innovations(s.model, seed);
  s.trajectory = run_forward_reparam(s.model, s.backward, s.z);
  s.log_psi = s.trajectory.total_log_weight();
  return s;
}

InnovationSet pcn_propose(const InnovationSet& z, double lambda, Rng& rng) {
  if (lambda < 0 || lambda >= 1)
    throw ValidationError("pcn_propose: lambda must lie in [0, 1)");
  double fresh = std::sqrt(1.0 - lambda * lambda);
  InnovationSet out = z;
  for (auto& v : out.gauss)
    if (v)
      for (int i = 0; i < v->size(); ++i) (*v)[i] = lambda * (*v)[i] + fresh * draw_normal(rng);
  for (auto& path : out.sde)
    if (path)
      for (Vec& v : *path)
        for (int i = 0; i < v.size(); ++i) v[i] = lambda * v[i] + fresh * draw_normal(rng);
  for (auto& path : out.wf)
    if (path)
      for (double& v : *path) v = lambda * v + fresh * draw_normal(rng);
  return out;
}

bool mcmc_step_path(ChainState& s, double lambda, Rng& rng) {
  InnovationSet zp = pcn_propose(s.z, lambda, rng);
  Trajectory t = run_forward_reparam(s.model, s.backward, zp);
  double psi = t.total_log_weight();
  if (!std::isfinite(psi)) return false;
  if (!accept(psi - s.log_psi, rng)) return false;
  s.z = std::move(zp);
  s.trajectory = std::move(t);
  s.log_psi = psi;
  return true;
}

bool mcmc_step_theta(ChainState& s, const ModelFactory& factory,
                     const std::vector<Parameter>& params, int k, Rng& rng) {
  if (k < 0 || k >= static_cast<int>(params.size()) || k >= s.theta.size())
    throw ValidationError("mcmc_step_theta: no such parameter block");
  const Parameter& p = params[k];
  Vec theta = s.theta;
  theta[k] += p.step * draw_normal(rng);
  if (theta[k] < p.lower || theta[k] > p.upper) return false;

  ChainState cand;
  if (!try_remap(factory, theta, s.z, cand)) return false;
  if (!accept(cand.log_psi - s.log_psi, rng)) return false;
  s = std::move(cand);
  return true;
}

double conjugate_update_obs_variance(ChainState& s, const ModelFactory& factory, int eps_index,
                                     double prior_shape, double prior_rate, Rng& rng) {
  if (eps_index < 0 || eps_index >= s.theta.size())
    throw ValidationError("conjugate_update_obs_variance: bad parameter index");
  if (prior_shape <= 0 || prior_rate <= 0)
    throw ValidationError("conjugate_update_obs_variance: prior parameters must be positive");

  double sq = 0;
  int n = 0;
  const Topology& topo = s.model.topology();
  for (VertexId v : topo.leaves()) {
    int e = topo.in_arcs(v)[0];
    const Edge& ed = s.model.edge(e);
    const auto* k = std::get_if<GaussianKernel>(&ed.kernel);
    if (!k)
      throw ValidationError(
          "conjugate_update_obs_variance: every leaf edge must be Gaussian with covariance "
          "theta[eps] * I");
    VertexId src = ed.sources[0];
    const State& xs = src == kRoot ? s.model.root_state() : s.trajectory.states[src];
    Vec r = std::get<Vec>(s.model.observation(v)) - k->mean(std::get<Vec>(xs));
    sq += r.squaredNorm();
    n += static_cast<int>(r.size());
  }

  double post_shape = prior_shape + 0.5 * n;
  double post_rate = prior_rate + 0.5 * sq;
  double variance = post_rate / draw_gamma(rng, post_shape, 1.0);

  Vec theta = s.theta;
  theta[eps_index] = variance;
  ChainState cand;
  if (!try_remap(factory, theta, s.z, cand))
    throw NumericError(
        "conjugate_update_obs_variance: model rejected the drawn variance; check that the "
        "factory accepts any positive value at eps_index");
  s = std::move(cand);
  return variance;
}

Vec MCMCTrace::posterior_mean() const {
  if (theta.rows() <= burnin)
    throw ValidationError("posterior_mean: no rows after burn-in");
  return theta.bottomRows(theta.rows() - burnin).colwise().mean().transpose();
}

ChainResult run_chain(const ModelFactory& factory, const std::vector<Parameter>& params,
                      const MCMCOptions& opt) {
  if (opt.iterations < 1) throw ValidationError("run_chain: need at least one iteration");
  if (opt.burnin < 0 || opt.burnin >= opt.iterations)
    throw ValidationError("run_chain: burn-in must be shorter than the run");
  if (opt.path_updates_per_iter < 0)
    throw ValidationError("run_chain: negative path update count");
  if (opt.conjugate_eps_index >= static_cast<int>(params.size()))
    throw ValidationError("run_chain: conjugate variance index out of range");

  const int np = static_cast<int>(params.size());
  Vec theta0(np);
  for (int i = 0; i < np; ++i) theta0[i] = params[i].value;

  ChainState s = make_chain_state(factory, theta0, derive_seed(opt.seed, 0xb0f0));
  Rng rng = make_rng(opt.seed, 0xc4a1);

  ChainResult res;
  res.trace.names.reserve(np);
  for (const Parameter& p : params) res.trace.names.push_back(p.name);
  res.trace.theta.resize(opt.iterations, np);
  res.trace.log_psi.resize(opt.iterations);
  res.trace.burnin = opt.burnin;
  res.trace.theta_acceptance = Vec::Zero(np);

  long long path_tries = 0, path_hits = 0;
  std::vector<long long> theta_tries(np, 0), theta_hits(np, 0);

  for (int it = 0; it < opt.iterations; ++it) {
    for (int j = 0; j < opt.path_updates_per_iter; ++j) {
      ++path_tries;
      path_hits += mcmc_step_path(s, opt.lambda, rng);
    }
    for (int k = 0; k < np; ++k) {
      if (params[k].step <= 0 || k == opt.conjugate_eps_index) continue;
      ++theta_tries[k];
      theta_hits[k] += mcmc_step_theta(s, factory, params, k, rng);
    }
    if (opt.conjugate_eps_index >= 0)
      conjugate_update_obs_variance(s, factory, opt.conjugate_eps_index, opt.eps_prior_shape,
                                    opt.eps_prior_rate, rng);
    res.trace.theta.row(it) = s.theta.transpose();
    res.trace.log_psi[it] = s.log_psi;
  }

  res.trace.path_acceptance = path_tries ? double(path_hits) / double(path_tries) : 0.0;
  for (int k = 0; k < np; ++k)
    res.trace.theta_acceptance[k] =
        theta_tries[k] ? double(theta_hits[k]) / double(theta_tries[k]) : 0.0;
  res.state = std::move(s);
  return res;
}

}  // namespace bffg
