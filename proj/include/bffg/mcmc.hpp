#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bffg/engine.hpp"

namespace bffg {

/* One scalar parameter block: flat prior on [lower, upper], random-walk
 * proposal with standard deviation `step`.  step <= 0 pins the parameter
 * (it still reaches the model factory, it just gets no walk update). */
struct Parameter {
  std::string name;
  double value = 0;
  double lower = -kInf;
  double upper = kInf;
  double step = 0.1;
};

/* Rebuilds the model for a parameter vector.  Must keep the wiring and every
 * edge grid fixed across calls so one innovation set maps through any theta;
 * throwing ValidationError/NumericError marks the vector invalid and the
 * proposal is rejected. */
using ModelFactory = std::function<Model(const Vec&)>;

/* Joint chain state over (theta, innovations).  The trajectory is the image
 * of the innovations through the guided map under the cached backward pass,
 * and log_psi is its total log weight (root value included), so the pair is
 * always mutually consistent. */
struct ChainState {
  Vec theta;
  InnovationSet z;
  Model model;
  BackwardPass backward;
  Trajectory trajectory;
  double log_psi = 0;
};

ChainState make_chain_state(const ModelFactory& factory, const Vec& theta, std::uint64_t seed);

/* Autoregressive innovation proposal z° = lambda z + sqrt(1-lambda^2) w with
 * w fresh standard normals, applied per arc.  Leaves the standard normal law
 * invariant, and the Metropolis proposal ratio is exactly one. */
InnovationSet pcn_propose(const InnovationSet& z, double lambda, Rng& rng);

/* One innovation update: propose, re-map through the cached backward pass,
 * accept with probability exp(log_psi° - log_psi).  A non-finite proposal
 * weight is rejected outright.  Returns whether the move was accepted. */
bool mcmc_step_path(ChainState& s, double lambda, Rng& rng);

/* One random-walk update of parameter block k: re-runs the backward pass
 * under theta° and re-maps the current innovations.  Out-of-bounds values,
 * factory failures, and non-finite weights reject. */
bool mcmc_step_theta(ChainState& s, const ModelFactory& factory,
                     const std::vector<Parameter>& params, int k, Rng& rng);

/* Exact Gibbs draw of the observation-noise variance for models whose leaf
 * edges are Gaussian with covariance theta[eps_index] * I: with prior
 * InvGamma(a, b), the full conditional is
 *   InvGamma(a + n/2, b + sum of squared leaf residuals / 2)
 * with n the total scalar observation count.  Updates theta, refreshes the
 * backward pass and re-maps the innovations; returns the drawn variance. */
double conjugate_update_obs_variance(ChainState& s, const ModelFactory& factory, int eps_index,
                                     double prior_shape, double prior_rate, Rng& rng);

struct MCMCOptions {
  int iterations = 1000;
  int burnin = 0;              // recorded but flagged in the trace
  double lambda = 0.9;         // innovation proposal memory
  std::uint64_t seed = 1;
  int path_updates_per_iter = 1;
  int conjugate_eps_index = -1;  // >= 0 enables the Gibbs variance update
  double eps_prior_shape = 2.0;
  double eps_prior_rate = 0.005;
};

struct MCMCTrace {
  std::vector<std::string> names;  // parameter names, column order of theta
  Mat theta;                       // one row per iteration (burn-in included)
  Vec log_psi;
  int burnin = 0;
  double path_acceptance = 0;  // over all iterations and path updates
  Vec theta_acceptance;        // per block; 0 for pinned blocks

  /* Column-wise mean of the post-burn-in rows. */
  Vec posterior_mean() const;
};

struct ChainResult {
  MCMCTrace trace;
  ChainState state;  // final state, for diagnostics and restarts
};

/* Alternates innovation updates, per-block parameter walks, and (optionally)
 * the conjugate variance draw; records theta and log_psi each iteration. */
ChainResult run_chain(const ModelFactory& factory, const std::vector<Parameter>& params,
                      const MCMCOptions& opt);

}  // namespace bffg
