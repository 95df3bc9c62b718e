#pragma once

#include <vector>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Markov jump process edge on a finite space over [0, tau]: generator rates
 * (rows sum to zero, off-diagonals nonnegative) and the comparison generator
 * aux_rates driving the backward potential. */
struct CTMCKernel {
  Mat rates;
  Mat aux_rates;
  double tau = 1.0;

  int states() const { return static_cast<int>(rates.rows()); }
  static CTMCKernel matched(const Mat& q, double tau);
  static CTMCKernel with_aux(const Mat& q, const Mat& aux, double tau);
};

/* Backward potential g(u, .) = exp(aux_rates (tau-u)) g_terminal, cached on a
 * time grid that is uniform over the edge and geometrically refined toward
 * tau (where the guided exit rates can grow when the terminal potential has
 * zeros).  grid values anchor both the thinning envelopes and cheap
 * evaluation of g at arbitrary times. */
struct CTMCBackward {
  Mat aux_rates;
  double tau = 1.0;
  std::vector<double> grid;
  std::vector<Vec> grid_g;  // linear-space values of g at grid times
};

/* exp(q t) v by uniformization; exact up to a Poisson tail below 1e-15.
 * Requires a generator matrix (rows summing to zero). */
Vec expm_action_uniformization(const Mat& q, const Vec& v, double t);

/* Dense matrix exponential (scaling and squaring). */
Mat expm_dense(const Mat& q, double t);

CTMCBackward ctmc_solve_backward(const CTMCKernel& k, const VectorPotential& g_child);

/* Message at time zero, in log space. */
VectorPotential ctmc_pullback(const CTMCKernel& k, const VectorPotential& g_child);

Vec ctmc_eval_g(const CTMCBackward& b, double u);

/* Guided generator at time u: off-diagonals rates(x,y) g(u,y)/g(u,x), the
 * diagonal defined as the negative off-diagonal row sum. */
Mat ctmc_guided_rates(const CTMCKernel& k, const CTMCBackward& b, double u);

struct CTMCPath {
  std::vector<double> jump_times;
  std::vector<int> states;  // states[0] at time 0; states[i+1] after jump i
  double tau = 0;

  int end_state() const { return states.back(); }
};

/* Exact-in-law simulation of the guided jump process by thinning with
 * piecewise-constant envelopes over the backward grid cells. */
CTMCPath ctmc_guided_simulate(const CTMCKernel& k, const CTMCBackward& b, int x0, Rng& rng);

/* Integral of the generator mismatch along the path; Gauss-Legendre with 8
 * nodes on every inter-jump interval. */
double ctmc_log_weight(const CTMCKernel& k, const CTMCBackward& b, const CTMCPath& path);

/* Leaf edge observed exactly at tau: log of the true end-point transition
 * probability minus the message value at the parent state. */
double ctmc_leaf_log_weight(const CTMCKernel& k, int obs, const VectorPotential& message, int x);

}  // namespace bffg
